#include "ventcast/numerics/tensor.hpp"

#include <sstream>
#include <unordered_set>

#include "ventcast/error.hpp"

namespace ventcast::num {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ')';
  return out.str();
}

std::vector<double>& detail::Node::ensure_grad() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

namespace {

std::shared_ptr<detail::Node> new_node(Shape shape, std::vector<double> values) {
  for (auto extent : shape) {
    if (extent == 0) fail(ErrorKind::dimension, "tensor extents must be positive, got " + shape_string(shape));
  }
  if (shape_size(shape) != values.size()) {
    fail(ErrorKind::dimension, "shape " + shape_string(shape) + " does not match " +
                                   std::to_string(values.size()) + " elements");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  return node;
}

const detail::Node& checked(const std::shared_ptr<detail::Node>& node) {
  if (!node) fail(ErrorKind::contract, "use of an undefined tensor");
  return *node;
}

}  // namespace

Tensor Tensor::zeros(Shape shape) {
  auto n = shape_size(shape);
  return Tensor(new_node(std::move(shape), std::vector<double>(n, 0.0)));
}

Tensor Tensor::full(Shape shape, double value) {
  auto n = shape_size(shape);
  return Tensor(new_node(std::move(shape), std::vector<double>(n, value)));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  return Tensor(new_node(std::move(shape), std::move(values)));
}

Tensor Tensor::scalar(double value) { return Tensor(new_node({1}, {value})); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  auto node = new_node(std::move(shape), std::move(values));
  node->requires_grad = true;
  return Tensor(std::move(node));
}

const Shape& Tensor::shape() const { return checked(node_).shape; }
std::size_t Tensor::size() const { return checked(node_).data.size(); }

std::size_t Tensor::rows() const {
  const auto& s = shape();
  if (s.size() != 2) fail(ErrorKind::dimension, "rows() needs a matrix, got " + shape_string(s));
  return s[0];
}

std::size_t Tensor::cols() const {
  const auto& s = shape();
  if (s.size() != 2) fail(ErrorKind::dimension, "cols() needs a matrix, got " + shape_string(s));
  return s[1];
}

std::span<const double> Tensor::data() const { return checked(node_).data; }

std::span<double> Tensor::mutable_data() {
  checked(node_);
  return node_->data;
}

double Tensor::item() const {
  if (size() != 1) fail(ErrorKind::dimension, "item() needs one element, got " + shape_string(shape()));
  return node_->data[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }
bool Tensor::has_grad() const { return !checked(node_).grad.empty(); }
std::span<const double> Tensor::grad() const { return checked(node_).grad; }

void Tensor::zero_grad() {
  checked(node_);
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  const auto& n = checked(node_);
  return Tensor(new_node(n.shape, n.data));
}

Tensor Tensor::clone() const {
  const auto& n = checked(node_);
  auto copy = new_node(n.shape, n.data);
  copy->requires_grad = n.requires_grad;
  return Tensor(std::move(copy));
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor detail::make_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                           std::function<void(Node&)> backward_fn) {
  auto node = new_node(std::move(shape), std::move(data));
  if (!g_grad_enabled) return Tensor(std::move(node));
  bool any = false;
  for (const auto& p : parents) {
    const auto& pn = checked(p.node());
    if (pn.consumed) fail(ErrorKind::contract, "operation on a tensor from a consumed graph");
    any = any || pn.requires_grad;
  }
  if (!any) return Tensor(std::move(node));
  node->requires_grad = true;
  node->parents.reserve(parents.size());
  for (auto& p : parents) node->parents.push_back(p.node());
  node->backward = std::move(backward_fn);
  return Tensor(std::move(node));
}

void backward(const Tensor& loss) {
  auto root = loss.node();
  if (!root) fail(ErrorKind::contract, "backward on an undefined tensor");
  if (root->data.size() != 1) {
    fail(ErrorKind::dimension, "backward needs a scalar loss, got " + shape_string(root->shape));
  }
  if (root->consumed) fail(ErrorKind::contract, "backward called twice on the same graph");
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order without recursion depth
  // limits on long recurrent graphs.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      auto* parent = node->parents[next++].get();
      if (parent->requires_grad && !parent->is_leaf() && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto* node = *it;
    node->ensure_grad();
    node->backward(*node);
  }
  for (auto* node : order) {
    node->consumed = true;
    node->backward = nullptr;
    node->parents.clear();
    node->grad.clear();
    node->grad.shrink_to_fit();
  }
}

}  // namespace ventcast::num
