#include "ventcast/encoder/pretrain.hpp"

#include <cstdio>
#include <random>

#include "ventcast/error.hpp"
#include "ventcast/io/container.hpp"
#include "ventcast/numerics/adam.hpp"

namespace ventcast::encoder {

PretrainResult pretrain(std::span<const CorpusEntry> corpus, const text::Vocabulary& vocab, const EncoderConfig& config,
                        const PretrainOptions& options, const std::set<std::string>& holdout_note_ids) {
  if (corpus.empty()) fail(ErrorKind::validation, "pretrain: empty corpus");
  for (const auto& entry : corpus) {
    if (holdout_note_ids.contains(entry.note_id)) {
      fail(ErrorKind::leakage, "pretrain: note " + entry.note_id + " belongs to the holdout set");
    }
  }
  PretrainResult result{EncoderModel::initialize(config, vocab, options.seed), {}};
  if (options.steps == 0) return result;
  if (options.batch_size == 0) fail(ErrorKind::config, "pretrain: batch_size must be positive");

  const auto& c = result.model.config();
  std::vector<text::TokenSequence> sequences;
  std::vector<std::vector<std::uint8_t>> fixed;
  for (const auto& entry : corpus) {
    auto seq = text::trim_padding(text::tokenize(entry.text, vocab, c.max_len, entry.note_id));
    auto f = fixed_positions(seq, vocab);
    if (std::find(f.begin(), f.end(), 0) == f.end()) continue;  // nothing predictable
    sequences.push_back(std::move(seq));
    fixed.push_back(std::move(f));
  }
  if (sequences.empty()) fail(ErrorKind::validation, "pretrain: corpus has no predictable tokens");

  auto params = result.model.parameters();
  auto state = num::make_optimizer_state(params, {.lr = options.lr});
  // Batch composition and permutations come from one stream; dropout from
  // another so enabling dropout does not change the sampled batches.
  std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ull);
  std::mt19937_64 dropout_rng(options.seed + 1);
  std::uniform_int_distribution<std::size_t> pick(0, sequences.size() - 1);
  EncodeOptions encode_options;
  encode_options.dropout_rng = &dropout_rng;

  std::vector<text::TokenSequence> batch;
  std::vector<PermutationPlan> plans;
  for (std::size_t step = 1; step <= options.steps; ++step) {
    batch.clear();
    plans.clear();
    for (std::size_t i = 0; i < options.batch_size; ++i) {
      const auto idx = pick(rng);
      batch.push_back(sequences[idx]);
      plans.push_back(sample_permutation(sequences[idx].ids.size(), rng(), c.predict_fraction, fixed[idx]));
    }
    num::zero_grads(params);
    auto loss = plm_loss(plm_forward(result.model, batch, plans, encode_options));
    num::backward(loss);
    num::optimizer_step(params, state);
    result.loss_trace.push_back(loss.item());
    if (options.on_step) options.on_step(step, loss.item());
  }
  result.model.set_steps(options.steps);
  return result;
}

void write_loss_trace(const std::filesystem::path& path, std::span<const double> trace) {
  std::string out = "step,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < trace.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i + 1, trace[i]);
    out += buf;
  }
  io::write_file(path, out);
}

double smoothed_tail(std::span<const double> trace, std::size_t window) {
  if (trace.empty()) fail(ErrorKind::contract, "smoothed_tail: empty trace");
  const auto n = std::min(window == 0 ? trace.size() : window, trace.size());
  double total = 0.0;
  for (std::size_t i = trace.size() - n; i < trace.size(); ++i) total += trace[i];
  return total / static_cast<double>(n);
}

}  // namespace ventcast::encoder
