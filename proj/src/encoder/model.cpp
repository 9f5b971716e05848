#include "ventcast/encoder/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ventcast/error.hpp"
#include "ventcast/numerics/ops.hpp"

namespace ventcast::encoder {

using num::Tensor;

namespace {

constexpr double kInitStd = 0.02;
constexpr std::string_view kHeadPrefix = "head.";

std::string layer_name(std::size_t layer, std::string_view leaf) {
  return "layer." + std::to_string(layer) + "." + std::string(leaf);
}

std::vector<std::pair<std::string, num::Shape>> parameter_shapes(const EncoderConfig& c) {
  const auto d = c.d_model;
  std::vector<std::pair<std::string, num::Shape>> shapes{{"word_emb", {c.vocab_size, d}}, {"mask_emb", {1, d}}};
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    for (auto leaf : {"attn.q", "attn.k", "attn.v", "attn.o", "attn.r"}) shapes.emplace_back(layer_name(l, leaf), num::Shape{d, d});
    shapes.emplace_back(layer_name(l, "attn.r_w_bias"), num::Shape{d});
    shapes.emplace_back(layer_name(l, "attn.r_r_bias"), num::Shape{d});
    shapes.emplace_back(layer_name(l, "ln1.gamma"), num::Shape{d});
    shapes.emplace_back(layer_name(l, "ln1.beta"), num::Shape{d});
    shapes.emplace_back(layer_name(l, "ff.w1"), num::Shape{d, c.d_inner});
    shapes.emplace_back(layer_name(l, "ff.b1"), num::Shape{c.d_inner});
    shapes.emplace_back(layer_name(l, "ff.w2"), num::Shape{c.d_inner, d});
    shapes.emplace_back(layer_name(l, "ff.b2"), num::Shape{d});
    shapes.emplace_back(layer_name(l, "ln2.gamma"), num::Shape{d});
    shapes.emplace_back(layer_name(l, "ln2.beta"), num::Shape{d});
  }
  shapes.emplace_back("lm.w", num::Shape{d, c.vocab_size - text::Vocabulary::kSpecialCount});
  shapes.emplace_back("lm.b", num::Shape{c.vocab_size - text::Vocabulary::kSpecialCount});
  return shapes;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

struct LayerParams {
  const Tensor *q, *k, *v, *o, *r, *r_w_bias, *r_r_bias;
  const Tensor *ln1_gamma, *ln1_beta, *w1, *b1, *w2, *b2, *ln2_gamma, *ln2_beta;
};

LayerParams layer_params(const EncoderModel& m, std::size_t l) {
  auto p = [&](std::string_view leaf) { return &m.param(layer_name(l, leaf)); };
  return {p("attn.q"),    p("attn.k"),   p("attn.v"), p("attn.o"),  p("attn.r"),    p("attn.r_w_bias"),
          p("attn.r_r_bias"), p("ln1.gamma"), p("ln1.beta"), p("ff.w1"), p("ff.b1"), p("ff.w2"),
          p("ff.b2"),     p("ln2.gamma"), p("ln2.beta")};
}

// Sinusoidal relative-distance table plus, for each (query, key) pair, the
// table row of its distance.
struct RelativePositions {
  Tensor table;                    // [rows x d_model], constant
  std::vector<std::size_t> index;  // [n_queries x n_keys]
};

RelativePositions relative_positions(std::span<const std::int64_t> query_pos, std::span<const std::int64_t> key_pos,
                                     std::size_t d_model) {
  std::int64_t dmin = query_pos[0] - key_pos[0], dmax = dmin;
  for (auto q : query_pos) {
    for (auto k : key_pos) {
      dmin = std::min(dmin, q - k);
      dmax = std::max(dmax, q - k);
    }
  }
  const auto rows = static_cast<std::size_t>(dmax - dmin + 1);
  std::vector<double> table(rows * d_model);
  for (std::size_t row = 0; row < rows; ++row) {
    const double dist = static_cast<double>(dmax - static_cast<std::int64_t>(row));
    for (std::size_t j = 0; j < d_model; ++j) {
      const double freq = std::pow(10000.0, -2.0 * static_cast<double>(j / 2) / static_cast<double>(d_model));
      table[row * d_model + j] = j % 2 == 0 ? std::sin(dist * freq) : std::cos(dist * freq);
    }
  }
  RelativePositions out{Tensor::from({rows, d_model}, std::move(table)), {}};
  out.index.reserve(query_pos.size() * key_pos.size());
  for (auto q : query_pos) {
    for (auto k : key_pos) out.index.push_back(static_cast<std::size_t>(dmax - (q - k)));
  }
  return out;
}

Tensor maybe_dropout(const Tensor& x, const EncoderConfig& c, const EncodeOptions& options) {
  if (options.dropout_rng == nullptr || c.dropout == 0.0) return x;
  return num::dropout(x, c.dropout, *options.dropout_rng);
}

// One attention + feed-forward block. `stream` is the representation being
// updated (content or query rows), `keys` the content representation it
// reads from.
Tensor layer_forward(const LayerParams& p, const EncoderConfig& c, const Tensor& stream, const Tensor& keys,
                     const Tensor& rel_proj, std::span<const std::size_t> rel_index,
                     std::span<const std::uint8_t> mask, const EncodeOptions& options) {
  const auto dh = c.d_head;
  const auto n_keys = keys.rows();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  auto q = num::matmul(stream, *p.q);
  auto k = num::matmul(keys, *p.k);
  auto v = num::matmul(keys, *p.v);
  std::vector<Tensor> heads;
  heads.reserve(c.n_heads);
  for (std::size_t h = 0; h < c.n_heads; ++h) {
    auto qh = num::slice(q, 1, h * dh, dh);
    auto kh = num::slice(k, 1, h * dh, dh);
    auto vh = num::slice(v, 1, h * dh, dh);
    auto rh = num::slice(rel_proj, 1, h * dh, dh);
    auto content_term = num::matmul(num::add_row(qh, num::slice(*p.r_w_bias, 0, h * dh, dh)), num::transpose(kh));
    auto position_full = num::matmul(num::add_row(qh, num::slice(*p.r_r_bias, 0, h * dh, dh)), num::transpose(rh));
    auto position_term = num::gather_rows(position_full, rel_index, n_keys);
    auto scores = num::scale(num::add(content_term, position_term), inv_sqrt);
    heads.push_back(num::matmul(num::masked_softmax(scores, mask), vh));
  }
  auto attended = num::matmul(c.n_heads == 1 ? heads.front() : num::concat(heads, 1), *p.o);
  auto x = num::layer_norm(num::add(stream, maybe_dropout(attended, c, options)), *p.ln1_gamma, *p.ln1_beta);
  auto ff = num::matmul(num::gelu(num::add_row(num::matmul(x, *p.w1), *p.b1)), *p.w2);
  ff = num::add_row(ff, *p.b2);
  return num::layer_norm(num::add(x, maybe_dropout(ff, c, options)), *p.ln2_gamma, *p.ln2_beta);
}

void check_ids(const text::TokenSequence& seq, const EncoderModel& model) {
  const auto& c = model.config();
  if (seq.ids.empty() || seq.ids.size() > c.max_len) {
    fail(ErrorKind::dimension, "sequence length " + std::to_string(seq.ids.size()) + " outside 1.." +
                                   std::to_string(c.max_len));
  }
  if (seq.true_length < 1 || seq.true_length > seq.ids.size()) fail(ErrorKind::contract, "invalid true_length");
  for (auto id : seq.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= c.vocab_size) {
      fail(ErrorKind::dimension, "token id " + std::to_string(id) + " outside vocabulary of " + std::to_string(c.vocab_size));
    }
  }
}

std::vector<std::int64_t> iota_positions(std::size_t n, std::int64_t start) {
  std::vector<std::int64_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = start + static_cast<std::int64_t>(i);
  return out;
}

}  // namespace

std::vector<std::string> EncoderModel::parameter_names(const EncoderConfig& config) {
  std::vector<std::string> names;
  for (auto& [n, s] : parameter_shapes(config)) names.push_back(n);
  return names;
}

EncoderModel EncoderModel::initialize(EncoderConfig config, text::Vocabulary vocab, std::uint64_t seed) {
  config.vocab_size = vocab.size();
  config.validate();
  if (vocab.size() <= text::Vocabulary::kSpecialCount) {
    fail(ErrorKind::config, "encoder needs at least one non-special token in the vocabulary");
  }
  EncoderModel m;
  m.config_ = config;
  m.vocab_ = std::move(vocab);
  m.seed_ = seed;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, kInitStd);
  for (auto& [name, shape] : parameter_shapes(config)) {
    std::vector<double> values(num::shape_size(shape), 0.0);
    if (ends_with(name, "gamma")) {
      std::fill(values.begin(), values.end(), 1.0);
    } else if (!(ends_with(name, "beta") || ends_with(name, ".b1") || ends_with(name, ".b2") || name == "lm.b" ||
                 ends_with(name, "_bias"))) {
      for (auto& v : values) v = normal(rng);
    }
    m.params_.emplace_back(name, Tensor::parameter(shape, std::move(values)));
  }
  return m;
}

const Tensor& EncoderModel::param(std::string_view name) const {
  for (const auto& [n, t] : params_) {
    if (n == name) return t;
  }
  fail(ErrorKind::internal, "encoder has no parameter '" + std::string(name) + "'");
}

std::vector<Tensor> EncoderModel::parameters() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& [n, t] : params_) out.push_back(t);
  return out;
}

EncoderModel EncoderModel::clone() const {
  EncoderModel m = *this;
  for (auto& [n, t] : m.params_) t = t.clone();
  return m;
}

io::Container EncoderModel::to_container() const {
  io::Container c;
  c.magic = std::string(kEncoderMagic);
  c.config = config_.to_entries();
  c.config.emplace_back("seed", std::to_string(seed_));
  c.config.emplace_back("steps", std::to_string(steps_));
  for (std::size_t i = text::Vocabulary::kSpecialCount; i < vocab_.size(); ++i) {
    c.config.emplace_back("vocab", vocab_.token(static_cast<text::TokenId>(i)));
  }
  for (const auto& [name, t] : params_) {
    c.records.push_back({name, t.shape(), std::vector<double>(t.data().begin(), t.data().end())});
  }
  return c;
}

EncoderModel EncoderModel::from_container(const io::Container& c) {
  if (c.magic != kEncoderMagic) fail(ErrorKind::parse, "not an encoder checkpoint");
  EncoderModel m;
  m.config_ = EncoderConfig::from_entries(c.config);
  m.config_.validate();
  m.seed_ = std::stoull(c.get("seed"));
  m.steps_ = std::stoull(c.get("steps"));
  m.vocab_ = text::Vocabulary::from_tokens(c.get_all("vocab"));
  if (m.vocab_.size() != m.config_.vocab_size) fail(ErrorKind::parse, "checkpoint vocabulary size mismatch");

  std::map<std::string, const io::NamedTensor*> by_name;
  for (const auto& r : c.records) {
    if (r.name.starts_with(kHeadPrefix)) continue;
    if (!by_name.emplace(r.name, &r).second) fail(ErrorKind::parse, "duplicate parameter '" + r.name + "'");
  }
  const auto shapes = parameter_shapes(m.config_);
  if (by_name.size() != shapes.size()) fail(ErrorKind::parse, "checkpoint parameter set does not match the architecture");
  for (const auto& [name, shape] : shapes) {
    auto it = by_name.find(name);
    if (it == by_name.end()) fail(ErrorKind::parse, "checkpoint lacks parameter '" + name + "'");
    if (it->second->shape != shape) fail(ErrorKind::parse, "parameter '" + name + "' has shape " + num::shape_string(it->second->shape));
    m.params_.emplace_back(name, Tensor::parameter(shape, it->second->values));
  }
  return m;
}

void EncoderModel::save(const std::filesystem::path& path) const { io::write_container(path, to_container()); }

EncoderModel EncoderModel::load(const std::filesystem::path& path) {
  return from_container(io::read_container(path, kEncoderMagic));
}

std::uint64_t EncoderModel::checksum() const { return io::fnv1a(io::serialize(to_container())); }

EncodeResult encode_content(const EncoderModel& model, std::span<const text::TokenSequence> batch,
                            const std::vector<Memory>* mems, const EncodeOptions& options) {
  const auto& c = model.config();
  if (mems && mems->size() != batch.size()) fail(ErrorKind::dimension, "one memory per sequence is required");
  EncodeResult result;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& seq = batch[b];
    check_ids(seq, model);
    const auto len = seq.ids.size();
    const Memory* mem = mems ? &(*mems)[b] : nullptr;
    const std::size_t mem_rows = mem && !mem->empty() && (*mem)[0].defined() ? (*mem)[0].rows() : 0;

    const auto key_pos = iota_positions(mem_rows + len, options.position_offset);
    const auto query_pos = iota_positions(len, options.position_offset + static_cast<std::int64_t>(mem_rows));
    auto rel = relative_positions(query_pos, key_pos, c.d_model);
    const auto n_keys = mem_rows + len;
    std::vector<std::uint8_t> mask(len * n_keys);
    for (std::size_t i = 0; i < len; ++i) {
      for (std::size_t j = 0; j < n_keys; ++j) mask[i * n_keys + j] = j < mem_rows || (j - mem_rows) < seq.true_length;
    }

    Tensor h = maybe_dropout(num::embedding(model.param("word_emb"), seq.ids), c, options);
    Memory next_mem;
    for (std::size_t l = 0; l < c.n_layers; ++l) {
      const auto p = layer_params(model, l);
      Tensor keys = mem_rows ? num::concat({(*mem)[l], h}, 0) : h;
      if (c.mem_len > 0) {
        auto body = num::slice(h, 0, 0, seq.true_length).detach();
        auto all = mem_rows ? num::concat({(*mem)[l].detach(), body}, 0) : body;
        const auto keep = std::min(c.mem_len, all.rows());
        next_mem.push_back(num::slice(all, 0, all.rows() - keep, keep).detach());
      }
      auto rel_proj = num::matmul(rel.table, *p.r);
      const bool last = l + 1 == c.n_layers;
      if (last && options.cls_only) {
        std::span<const std::size_t> row0(rel.index.data(), n_keys);
        std::span<const std::uint8_t> mask0(mask.data(), n_keys);
        h = layer_forward(p, c, num::slice(h, 0, 0, 1), keys, rel_proj, row0, mask0, options);
      } else {
        h = layer_forward(p, c, h, keys, rel_proj, rel.index, mask, options);
      }
    }
    result.hidden.push_back(h);
    if (c.mem_len > 0) result.mems.push_back(std::move(next_mem));
  }
  return result;
}

Tensor stack_hidden(const EncodeResult& result) { return num::stack(result.hidden); }

std::vector<std::uint8_t> fixed_positions(const text::TokenSequence& seq, const text::Vocabulary& vocab) {
  std::vector<std::uint8_t> fixed(seq.ids.size(), 0);
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    fixed[i] = i >= seq.true_length || seq.ids[i] == vocab.cls() || seq.ids[i] == vocab.unk() || seq.ids[i] == vocab.pad();
  }
  return fixed;
}

PlmOutput plm_forward(const EncoderModel& model, std::span<const text::TokenSequence> batch,
                      std::span<const PermutationPlan> plans, const EncodeOptions& options) {
  if (plans.size() != batch.size()) fail(ErrorKind::dimension, "plm_forward: one plan per sequence is required");
  const auto& c = model.config();
  PlmOutput out;
  std::vector<Tensor> pieces;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& seq = batch[b];
    const auto& plan = plans[b];
    check_ids(seq, model);
    const auto len = seq.ids.size();
    if (plan.length() != len) fail(ErrorKind::internal, "plm_forward: plan length does not match sequence");
    const auto fixed = fixed_positions(seq, model.vocab());
    check_plan(plan, fixed);
    const auto targets = plan.targets();
    if (targets.empty()) continue;

    const auto positions = iota_positions(len, options.position_offset);
    auto rel = relative_positions(positions, positions, c.d_model);
    std::vector<std::uint8_t> content_mask(len * len), query_mask(targets.size() * len);
    std::vector<std::size_t> query_index(targets.size() * len);
    for (std::size_t j = 0; j < len; ++j) {
      for (std::size_t k = 0; k < len; ++k) content_mask[j * len + k] = plan.content_visible(j, k) && k < seq.true_length;
    }
    for (std::size_t t = 0; t < targets.size(); ++t) {
      for (std::size_t k = 0; k < len; ++k) {
        query_mask[t * len + k] = plan.query_visible(targets[t], k) && k < seq.true_length;
        query_index[t * len + k] = rel.index[targets[t] * len + k];
      }
    }

    Tensor h = maybe_dropout(num::embedding(model.param("word_emb"), seq.ids), c, options);
    std::vector<std::int64_t> zeros(targets.size(), 0);
    Tensor g = num::embedding(model.param("mask_emb"), zeros);
    for (std::size_t l = 0; l < c.n_layers; ++l) {
      const auto p = layer_params(model, l);
      auto rel_proj = num::matmul(rel.table, *p.r);
      // The query stream reads the content stream of the previous layer.
      auto g_next = layer_forward(p, c, g, h, rel_proj, query_index, query_mask, options);
      h = layer_forward(p, c, h, h, rel_proj, rel.index, content_mask, options);
      g = g_next;
    }
    auto logits = num::add_row(num::matmul(g, model.param("lm.w")), model.param("lm.b"));
    std::vector<std::size_t> cols;
    for (auto pos : targets) {
      cols.push_back(static_cast<std::size_t>(seq.ids[pos]) - text::Vocabulary::kSpecialCount);
      out.targets.push_back({b, pos, seq.ids[pos]});
    }
    pieces.push_back(num::pick(num::log_softmax(logits), cols));
  }
  if (!pieces.empty()) out.log_probs = pieces.size() == 1 ? pieces.front() : num::concat(pieces, 0);
  return out;
}

Tensor plm_loss(const PlmOutput& output) {
  if (!output.log_probs.defined()) fail(ErrorKind::contract, "plm_loss: no prediction targets in batch");
  return num::scale(num::mean(output.log_probs), -1.0);
}

}  // namespace ventcast::encoder
