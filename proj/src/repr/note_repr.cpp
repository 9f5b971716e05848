#include "ventcast/repr/note_repr.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

#include "ventcast/error.hpp"
#include "ventcast/harness/metrics.hpp"
#include "ventcast/io/container.hpp"
#include "ventcast/numerics/adam.hpp"
#include "ventcast/numerics/ops.hpp"

namespace ventcast::repr {

using num::Tensor;

MetaHead MetaHead::initialize(std::size_t d_model, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x6d657461ull);
  std::normal_distribution<double> init(0.0, 0.02);
  std::vector<double> w(d_model);
  for (auto& v : w) v = init(rng);
  return {Tensor::parameter({d_model, 1}, std::move(w)), Tensor::parameter({1}, {0.0})};
}

MetaHead MetaHead::clone() const { return {w.clone(), b.clone()}; }

double MetaHead::predict(std::span<const double> embedding) const {
  if (embedding.size() != w.rows()) fail(ErrorKind::dimension, "meta head: embedding width mismatch");
  double z = b.data()[0];
  for (std::size_t i = 0; i < embedding.size(); ++i) z += embedding[i] * w.data()[i];
  return 1.0 / (1.0 + std::exp(-z));
}

namespace {

text::TokenSequence sequence_of(const encoder::EncoderModel& model, const cohort::Note& note) {
  return text::trim_padding(text::tokenize(note.text, model.vocab(), model.config().max_len, note.note_id));
}

// Probability per sequence under the head, [B].
Tensor head_probs(const encoder::EncoderModel& model, const MetaHead& head, std::span<const text::TokenSequence> batch,
                  std::mt19937_64* dropout_rng) {
  encoder::EncodeOptions opts;
  opts.cls_only = true;
  opts.dropout_rng = dropout_rng;
  auto enc = encoder::encode_content(model, batch, nullptr, opts);
  auto cls = num::concat(enc.hidden, 0);
  auto logits = num::add_row(num::matmul(cls, head.w), head.b);
  return num::reshape(num::sigmoid(logits), {batch.size()});
}

std::vector<double> score(const encoder::EncoderModel& model, const MetaHead& head,
                          const std::vector<text::TokenSequence>& seqs, std::size_t chunk) {
  num::NoGradGuard guard;
  std::vector<double> out;
  for (std::size_t i = 0; i < seqs.size(); i += chunk) {
    const auto n = std::min(chunk, seqs.size() - i);
    auto p = head_probs(model, head, std::span(seqs).subspan(i, n), nullptr);
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  return out;
}

std::vector<double> labels_of(std::span<const LabeledNote> notes, const char* which) {
  std::vector<double> out;
  for (const auto& n : notes) {
    if (!n.label) fail(ErrorKind::validation, std::string("meta_finetune: ") + which + " note " + n.note.note_id + " has no label");
    out.push_back(*n.label ? 1.0 : 0.0);
  }
  return out;
}

}  // namespace

MetaResult meta_finetune(const encoder::EncoderModel& pretrained, std::span<const LabeledNote> train,
                         std::span<const LabeledNote> val, const MetaOptions& options) {
  if (train.empty()) fail(ErrorKind::validation, "meta_finetune: empty training set");
  if (val.empty()) fail(ErrorKind::validation, "meta_finetune: empty validation set");
  if (options.batch_size == 0) fail(ErrorKind::config, "meta_finetune: batch_size must be positive");
  const auto train_labels = labels_of(train, "training");
  const auto val_labels = labels_of(val, "validation");
  std::set<std::string> train_patients;
  for (const auto& n : train) train_patients.insert(n.note.patient_id);
  for (const auto& n : val) {
    if (train_patients.contains(n.note.patient_id)) {
      fail(ErrorKind::leakage, "meta_finetune: patient " + n.note.patient_id + " is in both training and validation");
    }
  }

  MetaResult result{pretrained.clone(), MetaHead::initialize(pretrained.config().d_model, options.seed), {}, std::nullopt};
  if (options.epochs == 0) return result;

  auto model = pretrained.clone();
  auto head = result.head.clone();
  std::vector<text::TokenSequence> train_seqs, val_seqs;
  for (const auto& n : train) train_seqs.push_back(sequence_of(model, n.note));
  for (const auto& n : val) val_seqs.push_back(sequence_of(model, n.note));

  auto params = model.parameters();
  params.push_back(head.w);
  params.push_back(head.b);
  auto state = num::make_optimizer_state(params, {.lr = options.lr});
  std::mt19937_64 rng(options.seed ^ 0x2545f4914f6cdd1dull);
  std::mt19937_64 dropout_rng(options.seed + 1);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<text::TokenSequence> batch;
  std::vector<double> batch_labels;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      batch.clear();
      batch_labels.clear();
      for (std::size_t k = start; k < std::min(order.size(), start + options.batch_size); ++k) {
        batch.push_back(train_seqs[order[k]]);
        batch_labels.push_back(train_labels[order[k]]);
      }
      num::zero_grads(params);
      auto loss = num::bce_loss(head_probs(model, head, batch, &dropout_rng), batch_labels);
      num::backward(loss);
      num::optimizer_step(params, state);
    }

    const double val_auc = harness::auroc(score(model, head, val_seqs, 64), val_labels);
    result.val_auroc.push_back(val_auc);
    if (options.on_epoch) options.on_epoch(epoch, val_auc);
    const auto stop = harness::early_stop(result.val_auroc, options.patience);
    if (stop.best_epoch == epoch) {
      result.model = model.clone();
      result.model.set_steps(pretrained.steps());
      result.head = head.clone();
      result.best_epoch = epoch;
    }
    if (stop.stop) break;
  }
  return result;
}

NoteEmbedding embed_note(const encoder::EncoderModel& model, const cohort::Note& note) {
  return embed_notes(model, std::span(&note, 1)).front();
}

std::vector<NoteEmbedding> embed_notes(const encoder::EncoderModel& model, std::span<const cohort::Note> notes) {
  num::NoGradGuard guard;
  encoder::EncodeOptions opts;
  opts.cls_only = true;
  std::vector<NoteEmbedding> out;
  constexpr std::size_t kChunk = 64;
  std::vector<text::TokenSequence> seqs;
  for (std::size_t i = 0; i < notes.size(); i += kChunk) {
    seqs.clear();
    const auto end = std::min(notes.size(), i + kChunk);
    for (std::size_t k = i; k < end; ++k) seqs.push_back(sequence_of(model, notes[k]));
    auto enc = encoder::encode_content(model, seqs, nullptr, opts);
    for (std::size_t k = i; k < end; ++k) {
      const auto& h = enc.hidden[k - i].data();
      out.push_back({notes[k].patient_id, notes[k].note_id, notes[k].chart_time, std::vector<double>(h.begin(), h.end())});
    }
  }
  return out;
}

std::vector<NoteEmbedding> embed_patient(const encoder::EncoderModel& model, std::span<const cohort::Note> notes) {
  if (notes.empty()) fail(ErrorKind::validation, "embed_patient: patient has no notes");
  std::vector<cohort::Note> sorted(notes.begin(), notes.end());
  std::sort(sorted.begin(), sorted.end(), [](const cohort::Note& a, const cohort::Note& b) {
    return a.chart_time != b.chart_time ? a.chart_time < b.chart_time : a.note_id < b.note_id;
  });
  return embed_notes(model, sorted);
}

void save_tuned(const std::filesystem::path& path, const encoder::EncoderModel& model, const MetaHead& head,
                const std::string& task) {
  auto c = model.to_container();
  c.config.emplace_back("task", task);
  for (const auto& [name, t] : {std::pair{"head.w", head.w}, std::pair{"head.b", head.b}}) {
    c.records.push_back({name, t.shape(), std::vector<double>(t.data().begin(), t.data().end())});
  }
  io::write_container(path, c);
}

TunedCheckpoint load_tuned(const std::filesystem::path& path) {
  const auto c = io::read_container(path, encoder::kEncoderMagic);
  TunedCheckpoint out{encoder::EncoderModel::from_container(c), std::nullopt, {}};
  const io::NamedTensor *w = nullptr, *b = nullptr;
  for (const auto& r : c.records) {
    if (r.name == "head.w") w = &r;
    if (r.name == "head.b") b = &r;
  }
  if (w && b) {
    if (w->shape != num::Shape{out.model.config().d_model, 1} || b->shape != num::Shape{1}) {
      fail(ErrorKind::parse, "meta head has the wrong shape");
    }
    out.head = MetaHead{Tensor::parameter(w->shape, w->values), Tensor::parameter(b->shape, b->values)};
  }
  if (!c.get_all("task").empty()) out.task = c.get("task");
  return out;
}

void write_embeddings(const std::filesystem::path& path, std::span<const NoteEmbedding> embeddings) {
  std::string out;
  for (const auto& e : embeddings) {
    nlohmann::json j = {{"patient_id", e.patient_id},
                        {"note_id", e.note_id},
                        {"chart_time", io::format_timestamp(e.chart_time)},
                        {"embedding", e.values}};
    out += j.dump() + "\n";
  }
  io::write_file(path, out);
}

std::vector<NoteEmbedding> read_embeddings(const std::filesystem::path& path) {
  const auto content = io::read_file(path);
  std::vector<NoteEmbedding> out;
  std::size_t line_no = 0, pos = 0;
  while (pos < content.size()) {
    auto end = content.find('\n', pos);
    if (end == std::string::npos) end = content.size();
    const auto line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out.push_back({j.at("patient_id").get<std::string>(), j.at("note_id").get<std::string>(),
                     io::parse_timestamp(j.at("chart_time").get<std::string>()), j.at("embedding").get<std::vector<double>>()});
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::parse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace ventcast::repr
