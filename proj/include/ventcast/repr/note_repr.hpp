#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ventcast/cohort/records.hpp"
#include "ventcast/encoder/model.hpp"

namespace ventcast::repr {

struct NoteEmbedding {
  std::string patient_id;
  std::string note_id;
  cohort::Timestamp chart_time;
  std::vector<double> values;  // d_model
};

// Single-note classifier: sigmoid(E_cls . w + b).
struct MetaHead {
  num::Tensor w;  // [d_model x 1]
  num::Tensor b;  // [1]

  static MetaHead initialize(std::size_t d_model, std::uint64_t seed);
  MetaHead clone() const;
  double predict(std::span<const double> embedding) const;
};

struct LabeledNote {
  cohort::Note note;
  std::optional<bool> label;  // the patient's task label
};

struct MetaOptions {
  std::size_t epochs = 4;
  std::size_t batch_size = 32;
  double lr = 1e-5;
  std::uint64_t seed = 0;
  std::size_t patience = 0;  // 0 runs every epoch
  std::function<void(std::size_t, double)> on_epoch;  // (epoch, validation AUROC)
};

struct MetaResult {
  encoder::EncoderModel model;
  MetaHead head;
  std::vector<double> val_auroc;  // per epoch
  std::optional<std::size_t> best_epoch;
};

// Trains a copy of `pretrained` plus a fresh head on single notes and keeps
// the epoch with the best per-note validation AUROC. `pretrained` is never
// modified.
MetaResult meta_finetune(const encoder::EncoderModel& pretrained, std::span<const LabeledNote> train,
                         std::span<const LabeledNote> val, const MetaOptions& options);

// Last-layer [CLS] vector; pure and deterministic.
NoteEmbedding embed_note(const encoder::EncoderModel& model, const cohort::Note& note);
std::vector<NoteEmbedding> embed_notes(const encoder::EncoderModel& model, std::span<const cohort::Note> notes);
// Ascending chart time, ties by note id.
std::vector<NoteEmbedding> embed_patient(const encoder::EncoderModel& model, std::span<const cohort::Note> notes);

// Tuned checkpoints carry the head as `head.w` / `head.b` records and the
// task in the config block.
void save_tuned(const std::filesystem::path& path, const encoder::EncoderModel& model, const MetaHead& head,
                const std::string& task);
struct TunedCheckpoint {
  encoder::EncoderModel model;
  std::optional<MetaHead> head;
  std::string task;
};
TunedCheckpoint load_tuned(const std::filesystem::path& path);

// JSON lines: {patient_id, note_id, chart_time, embedding}.
void write_embeddings(const std::filesystem::path& path, std::span<const NoteEmbedding> embeddings);
std::vector<NoteEmbedding> read_embeddings(const std::filesystem::path& path);

}  // namespace ventcast::repr
