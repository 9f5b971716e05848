#include "ventcast/aggregator/aggregator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "ventcast/error.hpp"
#include "ventcast/harness/metrics.hpp"
#include "ventcast/io/csv.hpp"
#include "ventcast/io/values.hpp"
#include "ventcast/numerics/adam.hpp"
#include "ventcast/numerics/ops.hpp"

namespace ventcast::agg {

using num::Shape;
using num::Tensor;

std::string to_string(Pooling pooling) { return pooling == Pooling::bilstm ? "bilstm" : "mean"; }

Pooling parse_pooling(const std::string& name) {
  if (name == "bilstm") return Pooling::bilstm;
  if (name == "mean") return Pooling::mean;
  fail(ErrorKind::config, "unknown pooling '" + name + "' (expected bilstm or mean)");
}

void AggregatorConfig::validate() const {
  if (input_size == 0 || hidden_size == 0 || n_layers == 0 || predictor_hidden == 0 || batch_size == 0) {
    fail(ErrorKind::config, "aggregator config: sizes must be positive");
  }
  if (!(lr > 0.0)) fail(ErrorKind::config, "aggregator config: lr must be positive");
}

std::vector<std::pair<std::string, std::string>> AggregatorConfig::to_entries() const {
  return {{"input_size", std::to_string(input_size)},
          {"hidden_size", std::to_string(hidden_size)},
          {"n_layers", std::to_string(n_layers)},
          {"predictor_hidden", std::to_string(predictor_hidden)},
          {"pooling", to_string(pooling)},
          {"batch_size", std::to_string(batch_size)},
          {"lr", io::format_real(lr)},
          {"max_epochs", std::to_string(max_epochs)},
          {"patience", std::to_string(patience)}};
}

AggregatorConfig AggregatorConfig::from_entries(const std::vector<std::pair<std::string, std::string>>& entries) {
  AggregatorConfig c;
  for (const auto& [k, v] : entries) {
    if (k == "input_size") c.input_size = io::parse_count(k, v);
    else if (k == "hidden_size") c.hidden_size = io::parse_count(k, v);
    else if (k == "n_layers") c.n_layers = io::parse_count(k, v);
    else if (k == "predictor_hidden") c.predictor_hidden = io::parse_count(k, v);
    else if (k == "pooling") c.pooling = parse_pooling(v);
    else if (k == "batch_size") c.batch_size = io::parse_count(k, v);
    else if (k == "lr") c.lr = io::parse_real(k, v);
    else if (k == "max_epochs") c.max_epochs = io::parse_count(k, v);
    else if (k == "patience") c.patience = io::parse_count(k, v);
  }
  return c;
}

namespace {

const char* kDirections[] = {"fwd", "bwd"};

std::string lstm_name(std::size_t layer, std::size_t dir, const char* leaf) {
  return "lstm." + std::to_string(layer) + "." + kDirections[dir] + "." + leaf;
}

// Runs one direction over x [T x in]; returns the per-step hidden rows in
// input order.
std::vector<Tensor> run_direction(const Aggregator& m, std::size_t layer, std::size_t dir, const Tensor& x) {
  const auto h_size = m.config().hidden_size;
  const auto steps = x.rows();
  const auto projected = num::add_row(num::matmul(x, m.param(lstm_name(layer, dir, "w_x"))), m.param(lstm_name(layer, dir, "b")));
  const auto& w_h = m.param(lstm_name(layer, dir, "w_h"));
  Tensor h = Tensor::zeros({1, h_size}), c = Tensor::zeros({1, h_size});
  std::vector<Tensor> out(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const auto t = dir == 0 ? k : steps - 1 - k;
    auto gates = num::add(num::slice(projected, 0, t, 1), num::matmul(h, w_h));
    auto i = num::sigmoid(num::slice(gates, 1, 0, h_size));
    auto f = num::sigmoid(num::slice(gates, 1, h_size, h_size));
    auto g = num::tanh(num::slice(gates, 1, 2 * h_size, h_size));
    auto o = num::sigmoid(num::slice(gates, 1, 3 * h_size, h_size));
    c = num::add(num::mul(f, c), num::mul(i, g));
    h = num::mul(o, num::tanh(c));
    out[t] = h;
  }
  return out;
}

}  // namespace

std::vector<std::pair<std::string, Shape>> Aggregator::parameter_shapes(const AggregatorConfig& c) {
  std::vector<std::pair<std::string, Shape>> out;
  if (c.pooling == Pooling::bilstm) {
    for (std::size_t l = 0; l < c.n_layers; ++l) {
      const auto in = l == 0 ? c.input_size : 2 * c.hidden_size;
      for (std::size_t d = 0; d < 2; ++d) {
        out.emplace_back(lstm_name(l, d, "w_x"), Shape{in, 4 * c.hidden_size});
        out.emplace_back(lstm_name(l, d, "w_h"), Shape{c.hidden_size, 4 * c.hidden_size});
        out.emplace_back(lstm_name(l, d, "b"), Shape{4 * c.hidden_size});
      }
    }
  }
  out.emplace_back("pred.w1", Shape{c.latent_size(), c.predictor_hidden});
  out.emplace_back("pred.b1", Shape{c.predictor_hidden});
  out.emplace_back("pred.w2", Shape{c.predictor_hidden, 1});
  out.emplace_back("pred.b2", Shape{1});
  return out;
}

Aggregator Aggregator::initialize(const AggregatorConfig& config, std::uint64_t seed) {
  config.validate();
  Aggregator m;
  m.config_ = config;
  m.seed_ = seed;
  std::mt19937_64 rng(seed ^ 0x6167677265676174ull);
  for (const auto& [name, shape] : parameter_shapes(config)) {
    // Uniform(-1/sqrt(fan), 1/sqrt(fan)): fan is the hidden width for the
    // recurrence and the input width for the predictor layers.
    const bool recurrent = name.starts_with("lstm.");
    const std::size_t fan = recurrent ? config.hidden_size
                            : name == "pred.w1" || name == "pred.b1" ? config.latent_size()
                                                                     : config.predictor_hidden;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan));
    std::uniform_real_distribution<double> init(-bound, bound);
    std::vector<double> values(num::shape_size(shape));
    for (auto& v : values) v = init(rng);
    m.params_.emplace_back(name, Tensor::parameter(shape, std::move(values)));
  }
  return m;
}

const Tensor& Aggregator::param(std::string_view name) const {
  for (const auto& [n, t] : params_) {
    if (n == name) return t;
  }
  fail(ErrorKind::contract, "aggregator has no parameter '" + std::string(name) + "'");
}

std::vector<Tensor> Aggregator::parameters() const {
  std::vector<Tensor> out;
  for (const auto& [n, t] : params_) out.push_back(t);
  return out;
}

Aggregator Aggregator::clone() const {
  Aggregator m = *this;
  for (auto& [n, t] : m.params_) t = t.clone();
  return m;
}

Tensor bilstm_forward(const Aggregator& m, const Tensor& embeddings) {
  const auto& c = m.config();
  if (c.pooling != Pooling::bilstm) fail(ErrorKind::contract, "bilstm_forward on a mean-pooling aggregator");
  if (embeddings.dim() != 2 || embeddings.rows() == 0) fail(ErrorKind::dimension, "bilstm_forward: need a non-empty [T x d] sequence");
  if (embeddings.cols() != c.input_size) fail(ErrorKind::dimension, "bilstm_forward: embedding width mismatch");
  Tensor x = embeddings;
  Tensor last_fwd, last_bwd;
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    auto fwd = run_direction(m, l, 0, x);
    auto bwd = run_direction(m, l, 1, x);
    last_fwd = fwd.back();
    last_bwd = bwd.front();
    if (l + 1 < c.n_layers) x = num::concat({num::concat(fwd, 0), num::concat(bwd, 0)}, 1);
  }
  return num::concat({last_fwd, last_bwd}, 1);
}

Tensor aggregate_mean(const Tensor& embeddings) {
  if (embeddings.dim() != 2 || embeddings.rows() == 0) fail(ErrorKind::dimension, "aggregate_mean: need a non-empty [T x d] sequence");
  return num::reshape(num::mean_rows(embeddings), {1, embeddings.cols()});
}

Tensor Aggregator::latent(const Tensor& embeddings) const {
  if (config_.pooling == Pooling::bilstm) return bilstm_forward(*this, embeddings);
  if (embeddings.dim() == 2 && embeddings.cols() != config_.input_size) fail(ErrorKind::dimension, "aggregate_mean: embedding width mismatch");
  return aggregate_mean(embeddings);
}

Tensor Aggregator::predict(const Tensor& latents) const {
  if (latents.dim() != 2 || latents.cols() != config_.latent_size()) fail(ErrorKind::dimension, "predict: latent width mismatch");
  auto hidden = num::tanh(num::add_row(num::matmul(latents, param("pred.w1")), param("pred.b1")));
  auto logits = num::add_row(num::matmul(hidden, param("pred.w2")), param("pred.b2"));
  return num::reshape(num::sigmoid(logits), {latents.rows()});
}

Tensor Aggregator::forward(std::span<const Tensor> patients) const {
  if (patients.empty()) fail(ErrorKind::contract, "aggregator forward on an empty batch");
  std::vector<Tensor> latents;
  for (const auto& p : patients) latents.push_back(latent(p));
  return predict(num::concat(latents, 0));
}

io::Container Aggregator::to_container(const std::vector<std::pair<std::string, std::string>>& extra) const {
  io::Container c;
  c.magic = std::string(kAggregatorMagic);
  c.config = config_.to_entries();
  c.config.emplace_back("seed", std::to_string(seed_));
  c.config.insert(c.config.end(), extra.begin(), extra.end());
  for (const auto& [name, t] : params_) c.records.push_back({name, t.shape(), std::vector<double>(t.data().begin(), t.data().end())});
  return c;
}

Aggregator Aggregator::from_container(const io::Container& c) {
  if (c.magic != kAggregatorMagic) fail(ErrorKind::parse, "not an aggregator checkpoint");
  Aggregator m;
  m.config_ = AggregatorConfig::from_entries(c.config);
  m.config_.validate();
  m.seed_ = io::parse_u64("seed", c.get("seed"));
  const auto shapes = parameter_shapes(m.config_);
  if (c.records.size() != shapes.size()) fail(ErrorKind::parse, "aggregator checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto& r = c.records[i];
    if (r.name != shapes[i].first || r.shape != shapes[i].second) fail(ErrorKind::parse, "aggregator checkpoint record '" + r.name + "' mismatch");
    m.params_.emplace_back(r.name, Tensor::parameter(r.shape, r.values));
  }
  return m;
}

void Aggregator::save(const std::filesystem::path& path, const std::vector<std::pair<std::string, std::string>>& extra) const {
  io::write_container(path, to_container(extra));
}

Aggregator Aggregator::load(const std::filesystem::path& path) {
  return from_container(io::read_container(path, kAggregatorMagic));
}

std::vector<PatientSequence> group_by_patient(std::span<const repr::NoteEmbedding> notes) {
  std::map<std::string, std::vector<const repr::NoteEmbedding*>> grouped;
  for (const auto& n : notes) grouped[n.patient_id].push_back(&n);
  std::vector<PatientSequence> out;
  for (auto& [id, list] : grouped) {
    std::sort(list.begin(), list.end(), [](const auto* a, const auto* b) {
      return a->chart_time != b->chart_time ? a->chart_time < b->chart_time : a->note_id < b->note_id;
    });
    const auto width = list.front()->values.size();
    std::vector<double> flat;
    for (const auto* n : list) {
      if (n->values.size() != width) fail(ErrorKind::dimension, "patient " + id + " has embeddings of different widths");
      flat.insert(flat.end(), n->values.begin(), n->values.end());
    }
    out.push_back({id, Tensor::from({list.size(), width}, std::move(flat)), std::nullopt});
  }
  return out;
}

std::vector<double> predict_patients(const Aggregator& model, std::span<const PatientSequence> patients) {
  num::NoGradGuard guard;
  std::vector<double> out;
  for (std::size_t i = 0; i < patients.size(); i += 256) {
    std::vector<Tensor> batch;
    for (std::size_t k = i; k < std::min(patients.size(), i + 256); ++k) batch.push_back(patients[k].embeddings);
    auto p = model.forward(batch);
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  return out;
}

namespace {

std::vector<double> labels_of(std::span<const PatientSequence> patients, const char* which) {
  std::vector<double> out;
  for (const auto& p : patients) {
    if (!p.label) fail(ErrorKind::validation, std::string("finetune: ") + which + " patient " + p.patient_id + " has no label");
    out.push_back(*p.label ? 1.0 : 0.0);
  }
  return out;
}

}  // namespace

FinetuneResult finetune(std::span<const PatientSequence> train, std::span<const PatientSequence> val,
                        const AggregatorConfig& config, const FinetuneOptions& options) {
  if (train.empty()) fail(ErrorKind::validation, "finetune: empty training set");
  if (val.empty()) fail(ErrorKind::validation, "finetune: empty validation set");
  const auto train_labels = labels_of(train, "training");
  const auto val_labels = labels_of(val, "validation");
  std::set<std::string> seen;
  for (const auto& p : train) seen.insert(p.patient_id);
  for (const auto& p : val) {
    if (seen.contains(p.patient_id)) fail(ErrorKind::leakage, "finetune: patient " + p.patient_id + " is in both training and validation");
  }
  const auto before = options.encoder_checksum ? options.encoder_checksum() : 0;

  FinetuneResult result{Aggregator::initialize(config, options.seed), {}, std::nullopt};
  auto model = result.model.clone();
  auto params = model.parameters();
  auto state = num::make_optimizer_state(params, {.lr = config.lr});
  std::mt19937_64 rng(options.seed ^ 0x853c49e6748fea9bull);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::vector<Tensor> batch;
      std::vector<double> labels;
      for (std::size_t k = start; k < std::min(order.size(), start + config.batch_size); ++k) {
        batch.push_back(train[order[k]].embeddings);
        labels.push_back(train_labels[order[k]]);
      }
      num::zero_grads(params);
      auto loss = num::bce_loss(model.forward(batch), labels);
      num::backward(loss);
      num::optimizer_step(params, state);
    }
    const double auc = harness::auroc(predict_patients(model, val), val_labels);
    result.val_auroc.push_back(auc);
    if (options.on_epoch) options.on_epoch(epoch, auc);
    const auto stop = harness::early_stop(result.val_auroc, config.patience);
    if (stop.best_epoch == epoch) {
      result.model = model.clone();
      result.best_epoch = epoch;
    }
    if (stop.stop) break;
  }

  if (options.encoder_checksum && options.encoder_checksum() != before) {
    fail(ErrorKind::internal, "finetune: the frozen note encoder changed during aggregator training");
  }
  return result;
}

void write_predictions(const std::filesystem::path& path, std::span<const Prediction> predictions) {
  std::string out = "patient_id,task,p,label\n";
  char buf[40];
  for (const auto& p : predictions) {
    std::snprintf(buf, sizeof(buf), "%.17g", p.p);
    out += io::csv_field(p.patient_id) + "," + io::csv_field(p.task) + "," + buf + "," + (p.label ? (*p.label ? "1" : "0") : "") + "\n";
  }
  io::write_file(path, out);
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  const auto table = io::read_csv(path);
  if (table.header != std::vector<std::string>{"patient_id", "task", "p", "label"}) {
    fail(ErrorKind::parse, path.string() + ": unexpected predictions header");
  }
  std::vector<Prediction> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    Prediction p{r[0], r[1], io::parse_real("p", r[2]), std::nullopt};
    if (!r[3].empty()) p.label = io::parse_bool("label", r[3]);
    if (!(p.p >= 0.0 && p.p <= 1.0)) fail(ErrorKind::validation, path.string() + ":" + std::to_string(table.line_numbers[i]) + ": p outside [0,1]");
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace ventcast::agg
