#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ventcast/io/container.hpp"
#include "ventcast/numerics/tensor.hpp"
#include "ventcast/repr/note_repr.hpp"

namespace ventcast::agg {

inline constexpr std::string_view kAggregatorMagic = "CXLA1";

enum class Pooling { bilstm, mean };
std::string to_string(Pooling pooling);
Pooling parse_pooling(const std::string& name);

struct AggregatorConfig {
  std::size_t input_size = 64;  // note embedding width
  std::size_t hidden_size = 64;  // per direction
  std::size_t n_layers = 2;
  std::size_t predictor_hidden = 64;
  Pooling pooling = Pooling::bilstm;
  std::size_t batch_size = 128;
  double lr = 1e-4;
  std::size_t max_epochs = 50;
  std::size_t patience = 3;

  void validate() const;
  std::size_t latent_size() const { return pooling == Pooling::bilstm ? 2 * hidden_size : input_size; }
  std::vector<std::pair<std::string, std::string>> to_entries() const;
  static AggregatorConfig from_entries(const std::vector<std::pair<std::string, std::string>>& entries);
};

// Bi-LSTM (or mean pooling) over note embeddings followed by a tanh hidden
// layer and a logistic output. Copies share parameter storage.
class Aggregator {
 public:
  static Aggregator initialize(const AggregatorConfig& config, std::uint64_t seed);
  static std::vector<std::pair<std::string, num::Shape>> parameter_shapes(const AggregatorConfig& config);

  const AggregatorConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  const num::Tensor& param(std::string_view name) const;
  const std::vector<std::pair<std::string, num::Tensor>>& named_parameters() const { return params_; }
  std::vector<num::Tensor> parameters() const;
  Aggregator clone() const;

  // Fixed-size patient vector for embeddings [T x input_size], as [1 x latent].
  num::Tensor latent(const num::Tensor& embeddings) const;
  // Probabilities [B] for a batch of patient latents [B x latent].
  num::Tensor predict(const num::Tensor& latents) const;
  // Probabilities [B] for a batch of patients.
  num::Tensor forward(std::span<const num::Tensor> patients) const;

  io::Container to_container(const std::vector<std::pair<std::string, std::string>>& extra = {}) const;
  static Aggregator from_container(const io::Container& container);
  void save(const std::filesystem::path& path, const std::vector<std::pair<std::string, std::string>>& extra = {}) const;
  static Aggregator load(const std::filesystem::path& path);

 private:
  AggregatorConfig config_;
  std::uint64_t seed_ = 0;
  std::vector<std::pair<std::string, num::Tensor>> params_;
};

// H_N = [final forward state, final backward state] of the top layer, [1 x 2h].
num::Tensor bilstm_forward(const Aggregator& model, const num::Tensor& embeddings);
// Column mean of embeddings [T x d], as [1 x d].
num::Tensor aggregate_mean(const num::Tensor& embeddings);

struct PatientSequence {
  std::string patient_id;
  num::Tensor embeddings;  // [T x d], ascending chart time
  std::optional<bool> label;
};

// Groups note embeddings by patient, ordering notes by chart time then id.
std::vector<PatientSequence> group_by_patient(std::span<const repr::NoteEmbedding> notes);

struct FinetuneOptions {
  std::uint64_t seed = 0;
  // Computes a checksum of the frozen note encoder; evaluated before and
  // after training and compared.
  std::function<std::uint64_t()> encoder_checksum;
  std::function<void(std::size_t, double)> on_epoch;  // (epoch, validation AUROC)
};

struct FinetuneResult {
  Aggregator model;
  std::vector<double> val_auroc;
  std::optional<std::size_t> best_epoch;
};

FinetuneResult finetune(std::span<const PatientSequence> train, std::span<const PatientSequence> val,
                        const AggregatorConfig& config, const FinetuneOptions& options);

std::vector<double> predict_patients(const Aggregator& model, std::span<const PatientSequence> patients);

struct Prediction {
  std::string patient_id;
  std::string task;
  double p = 0.0;
  std::optional<bool> label;
};

// CSV `patient_id,task,p,label`.
void write_predictions(const std::filesystem::path& path, std::span<const Prediction> predictions);
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

}  // namespace ventcast::agg
