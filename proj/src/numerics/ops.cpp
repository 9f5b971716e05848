#include "ventcast/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ventcast/error.hpp"

namespace ventcast::num {

using detail::make_result;
using detail::Node;

namespace {

// Gradient buffer of parent i, or nullptr when it does not need one.
std::vector<double>* grad_of(Node& self, std::size_t i) {
  auto& parent = *self.parents[i];
  return parent.requires_grad ? &parent.ensure_grad() : nullptr;
}

const std::vector<double>& data_of(const Node& self, std::size_t i) { return self.parents[i]->data; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    fail(ErrorKind::dimension, std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                                   shape_string(b.shape()));
  }
}

void require_matrix(const Tensor& a, const char* op) {
  if (a.dim() != 2) fail(ErrorKind::dimension, std::string(op) + ": expected a matrix, got " + shape_string(a.shape()));
}

template <class F, class D>
Tensor unary(const Tensor& x, F value, D derivative) {
  auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = value(in[i]);
  return make_result(x.shape(), std::move(out), {x}, [derivative](Node& self) {
    auto* gx = grad_of(self, 0);
    if (!gx) return;
    const auto& xin = data_of(self, 0);
    for (std::size_t i = 0; i < xin.size(); ++i) (*gx)[i] += self.grad[i] * derivative(xin[i], self.data[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (auto* g = grad_of(self, p)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& xa = data_of(self, 0);
    const auto& xb = data_of(self, 1);
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * xb[i];
    }
    if (auto* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * xa[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * factor;
  return make_result(a.shape(), std::move(out), {a}, [factor](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * factor;
    }
  });
}

Tensor add_scalar(const Tensor& a, double value) {
  auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + value;
  return make_result(a.shape(), std::move(out), {a}, [](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

Tensor add_row(const Tensor& x, const Tensor& bias) {
  require_matrix(x, "add_row");
  const auto m = x.rows(), n = x.cols();
  if (bias.size() != n) {
    fail(ErrorKind::dimension, "add_row: bias " + shape_string(bias.shape()) + " does not match " +
                                   shape_string(x.shape()));
  }
  auto xs = x.data(), bs = bias.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xs[i * n + j] + bs[j];
  }
  return make_result(x.shape(), std::move(out), {x, bias}, [m, n](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < m * n; ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) (*g)[j] += self.grad[i * n + j];
      }
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.dim() != 2 || b.dim() != 2 || a.cols() != b.rows()) {
    fail(ErrorKind::dimension,
         "matmul: incompatible shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
  }
  const auto m = a.rows(), k = a.cols(), n = b.cols();
  auto x = a.data(), y = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = x[i * k + p];
      const double* brow = y.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    const auto& xa = data_of(self, 0);
    const auto& xb = data_of(self, 1);
    const double* dc = self.grad.data();
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* brow = xb.data() + p * n;
          const double* drow = dc + i * n;
          for (std::size_t j = 0; j < n; ++j) acc += drow[j] * brow[j];
          (*g)[i * k + p] += acc;
        }
      }
    }
    if (auto* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < m; ++i) {
        const double* drow = dc + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double av = xa[i * k + p];
          double* grow = g->data() + p * n;
          for (std::size_t j = 0; j < n; ++j) grow[j] += av * drow[j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const auto m = a.rows(), n = a.cols();
  auto x = a.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
  }
  return make_result({n, m}, std::move(out), {a}, [m, n](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) (*g)[i * n + j] += self.grad[j * m + i];
      }
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor gelu(const Tensor& x) {
  return unary(
      x, [](double v) { return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)); },
      [](double v, double) {
        const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
        const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
        return cdf + v * pdf;
      });
}

Tensor log(const Tensor& x) {
  for (double v : x.data()) {
    if (!(v > 0.0)) fail(ErrorKind::contract, "log of a non-positive value");
  }
  return unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const auto& shape = x.shape();
  if (axis >= shape.size()) {
    fail(ErrorKind::dimension, "softmax: axis " + std::to_string(axis) + " out of range for " + shape_string(shape));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t len = shape[axis];
  auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t s = 0; s < inner; ++s) {
      auto idx = [&](std::size_t k) { return (o * len + k) * inner + s; };
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, in[idx(k)]);
      double total = 0.0;
      for (std::size_t k = 0; k < len; ++k) total += (out[idx(k)] = std::exp(in[idx(k)] - mx));
      for (std::size_t k = 0; k < len; ++k) out[idx(k)] /= total;
    }
  }
  return make_result(shape, std::move(out), {x}, [outer, inner, len](Node& self) {
    auto* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t s = 0; s < inner; ++s) {
        auto idx = [&](std::size_t k) { return (o * len + k) * inner + s; };
        double dot = 0.0;
        for (std::size_t k = 0; k < len; ++k) dot += self.grad[idx(k)] * self.data[idx(k)];
        for (std::size_t k = 0; k < len; ++k) (*g)[idx(k)] += self.data[idx(k)] * (self.grad[idx(k)] - dot);
      }
    }
  });
}

Tensor masked_softmax(const Tensor& x, std::span<const std::uint8_t> mask) {
  require_matrix(x, "masked_softmax");
  const auto m = x.rows(), n = x.cols();
  if (mask.size() != m * n) fail(ErrorKind::dimension, "masked_softmax: mask size does not match " + shape_string(x.shape()));
  auto in = x.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (mask[i * n + j]) mx = std::max(mx, in[i * n + j]);
    }
    if (mx == -std::numeric_limits<double>::infinity()) continue;
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask[i * n + j]) total += (out[i * n + j] = std::exp(in[i * n + j] - mx));
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= total;
  }
  return make_result(x.shape(), std::move(out), {x}, [m, n](Node& self) {
    auto* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += self.grad[i * n + j] * self.data[i * n + j];
      for (std::size_t j = 0; j < n; ++j) {
        (*g)[i * n + j] += self.data[i * n + j] * (self.grad[i * n + j] - dot);
      }
    }
  });
}

Tensor log_softmax(const Tensor& x) {
  require_matrix(x, "log_softmax");
  const auto m = x.rows(), n = x.cols();
  auto in = x.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, in[i * n + j]);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += std::exp(in[i * n + j] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = in[i * n + j] - lse;
  }
  return make_result(x.shape(), std::move(out), {x}, [m, n](Node& self) {
    auto* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t i = 0; i < m; ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) total += self.grad[i * n + j];
      for (std::size_t j = 0; j < n; ++j) {
        (*g)[i * n + j] += self.grad[i * n + j] - std::exp(self.data[i * n + j]) * total;
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_matrix(x, "layer_norm");
  const auto m = x.rows(), n = x.cols();
  if (gamma.size() != n || beta.size() != n) {
    fail(ErrorKind::dimension, "layer_norm: affine parameters do not match " + shape_string(x.shape()));
  }
  auto in = x.data(), gm = gamma.data(), bt = beta.data();
  std::vector<double> out(m * n);
  // Saved per-row normalised values and inverse deviations for backward.
  std::vector<double> xhat(m * n), rstd(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += in[i * n + j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (in[i * n + j] - mu) * (in[i * n + j] - mu);
    var /= static_cast<double>(n);
    rstd[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (in[i * n + j] - mu) * rstd[i];
      out[i * n + j] = gm[j] * xhat[i * n + j] + bt[j];
    }
  }
  return make_result(x.shape(), std::move(out), {x, gamma, beta},
                     [m, n, xhat = std::move(xhat), rstd = std::move(rstd)](Node& self) {
                       const auto& gm = data_of(self, 1);
                       auto* gx = grad_of(self, 0);
                       auto* gg = grad_of(self, 1);
                       auto* gb = grad_of(self, 2);
                       std::vector<double> dxhat(n);
                       for (std::size_t i = 0; i < m; ++i) {
                         const double* dy = self.grad.data() + i * n;
                         const double* xh = xhat.data() + i * n;
                         if (gg) for (std::size_t j = 0; j < n; ++j) (*gg)[j] += dy[j] * xh[j];
                         if (gb) for (std::size_t j = 0; j < n; ++j) (*gb)[j] += dy[j];
                         if (!gx) continue;
                         double mean_d = 0.0, mean_dx = 0.0;
                         for (std::size_t j = 0; j < n; ++j) {
                           dxhat[j] = dy[j] * gm[j];
                           mean_d += dxhat[j];
                           mean_dx += dxhat[j] * xh[j];
                         }
                         mean_d /= static_cast<double>(n);
                         mean_dx /= static_cast<double>(n);
                         for (std::size_t j = 0; j < n; ++j) {
                           (*gx)[i * n + j] += rstd[i] * (dxhat[j] - mean_d - xh[j] * mean_dx);
                         }
                       }
                     });
}

Tensor embedding(const Tensor& table, std::span<const std::int64_t> ids) {
  require_matrix(table, "embedding");
  const auto vocab = table.rows(), d = table.cols();
  if (ids.empty()) fail(ErrorKind::dimension, "embedding: empty id list");
  std::vector<std::size_t> rows(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      fail(ErrorKind::dimension, "embedding: id " + std::to_string(ids[i]) + " outside vocabulary of " +
                                     std::to_string(vocab));
    }
    rows[i] = static_cast<std::size_t>(ids[i]);
  }
  auto t = table.data();
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(t.begin() + static_cast<std::ptrdiff_t>(rows[i] * d), d, out.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return make_result({ids.size(), d}, std::move(out), {table}, [rows = std::move(rows), d](Node& self) {
    auto* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) (*g)[rows[i] * d + j] += self.grad[i * d + j];
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) fail(ErrorKind::dimension, "concat: no inputs");
  const auto rank = parts.front().dim();
  if (rank == 1 && axis == 0) {
    std::vector<double> out;
    std::vector<std::size_t> sizes;
    for (const auto& p : parts) {
      if (p.dim() != 1) fail(ErrorKind::dimension, "concat: mixed ranks");
      out.insert(out.end(), p.data().begin(), p.data().end());
      sizes.push_back(p.size());
    }
    const auto total = out.size();
    return make_result({total}, std::move(out), parts, [sizes = std::move(sizes)](Node& self) {
      std::size_t offset = 0;
      for (std::size_t p = 0; p < sizes.size(); ++p) {
        if (auto* g = grad_of(self, p)) {
          for (std::size_t i = 0; i < sizes[p]; ++i) (*g)[i] += self.grad[offset + i];
        }
        offset += sizes[p];
      }
    });
  }
  if (rank != 2 || axis > 1) fail(ErrorKind::dimension, "concat: supports vectors on axis 0 and matrices on axes 0/1");
  for (const auto& p : parts) {
    if (p.dim() != 2 || p.shape()[1 - axis] != parts.front().shape()[1 - axis]) {
      fail(ErrorKind::dimension, "concat: incompatible shapes " + shape_string(parts.front().shape()) + " and " +
                                     shape_string(p.shape()));
    }
  }
  if (axis == 0) {
    const auto n = parts.front().cols();
    std::vector<double> out;
    std::vector<std::size_t> sizes;
    for (const auto& p : parts) {
      out.insert(out.end(), p.data().begin(), p.data().end());
      sizes.push_back(p.size());
    }
    const auto m = out.size() / n;
    return make_result({m, n}, std::move(out), parts, [sizes = std::move(sizes)](Node& self) {
      std::size_t offset = 0;
      for (std::size_t p = 0; p < sizes.size(); ++p) {
        if (auto* g = grad_of(self, p)) {
          for (std::size_t i = 0; i < sizes[p]; ++i) (*g)[i] += self.grad[offset + i];
        }
        offset += sizes[p];
      }
    });
  }
  const auto m = parts.front().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(m * total);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    auto src = parts[p].data();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < widths[p]; ++j) out[i * total + offset + j] = src[i * widths[p] + j];
    }
    offset += widths[p];
  }
  return make_result({m, total}, std::move(out), parts, [m, total, widths = std::move(widths)](Node& self) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < widths.size(); ++p) {
      if (auto* g = grad_of(self, p)) {
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < widths[p]; ++j) (*g)[i * widths[p] + j] += self.grad[i * total + offset + j];
        }
      }
      offset += widths[p];
    }
  });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  if (x.dim() == 1 && axis == 0) {
    if (length == 0 || start + length > x.size()) fail(ErrorKind::dimension, "slice: range outside " + shape_string(x.shape()));
    auto in = x.data();
    std::vector<double> out(in.begin() + static_cast<std::ptrdiff_t>(start),
                            in.begin() + static_cast<std::ptrdiff_t>(start + length));
    return make_result({length}, std::move(out), {x}, [start, length](Node& self) {
      if (auto* g = grad_of(self, 0)) {
        for (std::size_t i = 0; i < length; ++i) (*g)[start + i] += self.grad[i];
      }
    });
  }
  require_matrix(x, "slice");
  if (axis > 1) fail(ErrorKind::dimension, "slice: axis out of range");
  const auto m = x.rows(), n = x.cols();
  const auto extent = axis == 0 ? m : n;
  if (length == 0 || start + length > extent) fail(ErrorKind::dimension, "slice: range outside " + shape_string(x.shape()));
  const auto out_m = axis == 0 ? length : m;
  const auto out_n = axis == 0 ? n : length;
  const auto row0 = axis == 0 ? start : 0;
  const auto col0 = axis == 0 ? 0 : start;
  auto in = x.data();
  std::vector<double> out(out_m * out_n);
  for (std::size_t i = 0; i < out_m; ++i) {
    for (std::size_t j = 0; j < out_n; ++j) out[i * out_n + j] = in[(row0 + i) * n + col0 + j];
  }
  return make_result({out_m, out_n}, std::move(out), {x}, [=](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < out_m; ++i) {
        for (std::size_t j = 0; j < out_n; ++j) (*g)[(row0 + i) * n + col0 + j] += self.grad[i * out_n + j];
      }
    }
  });
}

Tensor stack(const std::vector<Tensor>& parts) {
  if (parts.empty()) fail(ErrorKind::dimension, "stack: no inputs");
  Shape shape{parts.size()};
  const auto& inner = parts.front().shape();
  shape.insert(shape.end(), inner.begin(), inner.end());
  std::vector<double> out;
  out.reserve(shape_size(shape));
  for (const auto& p : parts) {
    if (p.shape() != inner) fail(ErrorKind::dimension, "stack: mixed shapes " + shape_string(inner) + " and " + shape_string(p.shape()));
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  const auto each = shape_size(inner);
  return make_result(std::move(shape), std::move(out), parts, [each](Node& self) {
    for (std::size_t p = 0; p < self.parents.size(); ++p) {
      if (auto* g = grad_of(self, p)) {
        for (std::size_t i = 0; i < each; ++i) (*g)[i] += self.grad[p * each + i];
      }
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    fail(ErrorKind::dimension, "reshape: " + shape_string(x.shape()) + " cannot become " + shape_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), {x}, [](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_result({1}, {total}, {x}, [](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (auto& v : *g) v += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor mean_rows(const Tensor& x) {
  require_matrix(x, "mean_rows");
  const auto m = x.rows(), n = x.cols();
  auto in = x.data();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j] += in[i * n + j];
  }
  for (auto& v : out) v /= static_cast<double>(m);
  return make_result({n}, std::move(out), {x}, [m, n](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      const double w = 1.0 / static_cast<double>(m);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) (*g)[i * n + j] += self.grad[j] * w;
      }
    }
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index, std::size_t n) {
  require_matrix(x, "gather_rows");
  const auto m = x.rows(), k = x.cols();
  if (index.size() != m * n) fail(ErrorKind::dimension, "gather_rows: index size does not match");
  auto in = x.data();
  std::vector<double> out(m * n);
  std::vector<std::size_t> idx(index.begin(), index.end());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (idx[i * n + j] >= k) fail(ErrorKind::dimension, "gather_rows: index out of range");
      out[i * n + j] = in[i * k + idx[i * n + j]];
    }
  }
  return make_result({m, n}, std::move(out), {x}, [m, n, k, idx = std::move(idx)](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) (*g)[i * k + idx[i * n + j]] += self.grad[i * n + j];
      }
    }
  });
}

Tensor pick(const Tensor& x, std::span<const std::size_t> cols) {
  require_matrix(x, "pick");
  const auto m = x.rows(), n = x.cols();
  if (cols.size() != m) fail(ErrorKind::dimension, "pick: need one column per row");
  auto in = x.data();
  std::vector<double> out(m);
  std::vector<std::size_t> c(cols.begin(), cols.end());
  for (std::size_t i = 0; i < m; ++i) {
    if (c[i] >= n) fail(ErrorKind::dimension, "pick: column out of range");
    out[i] = in[i * n + c[i]];
  }
  return make_result({m}, std::move(out), {x}, [n, c = std::move(c)](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < c.size(); ++i) (*g)[i * n + c[i]] += self.grad[i];
    }
  });
}

Tensor bce_loss(const Tensor& p, std::span<const double> labels) {
  if (labels.size() != p.size()) fail(ErrorKind::dimension, "bce_loss: label count does not match probabilities");
  auto probs = p.data();
  const double count = static_cast<double>(probs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] >= 0.0 && probs[i] <= 1.0)) {
      fail(ErrorKind::contract, "bce_loss: probability " + std::to_string(probs[i]) + " outside [0,1]");
    }
    if (labels[i] != 0.0 && labels[i] != 1.0) fail(ErrorKind::contract, "bce_loss: label must be 0 or 1");
    const double q = std::clamp(probs[i], kProbabilityEps, 1.0 - kProbabilityEps);
    total -= labels[i] * std::log(q) + (1.0 - labels[i]) * std::log(1.0 - q);
  }
  std::vector<double> y(labels.begin(), labels.end());
  return make_result({1}, {total / count}, {p}, [y = std::move(y), count](Node& self) {
    auto* g = grad_of(self, 0);
    if (!g) return;
    const auto& probs = data_of(self, 0);
    for (std::size_t i = 0; i < probs.size(); ++i) {
      const double q = probs[i];
      if (q < kProbabilityEps || q > 1.0 - kProbabilityEps) continue;
      (*g)[i] += self.grad[0] * (-y[i] / q + (1.0 - y[i]) / (1.0 - q)) / count;
    }
  });
}

Tensor bce_loss(const Tensor& p, double label) {
  const double labels[] = {label};
  return bce_loss(p, std::span<const double>(labels, 1));
}

Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) fail(ErrorKind::contract, "dropout: rate must lie in [0,1)");
  if (rate == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  std::vector<double> mask(x.size());
  for (auto& v : mask) v = keep(rng) ? 1.0 / (1.0 - rate) : 0.0;
  return mul(x, Tensor::from(x.shape(), std::move(mask)));
}

}  // namespace ventcast::num
