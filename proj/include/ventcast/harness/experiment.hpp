#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ventcast/aggregator/aggregator.hpp"
#include "ventcast/cohort/rules.hpp"
#include "ventcast/config/run_config.hpp"
#include "ventcast/error.hpp"
#include "ventcast/harness/split.hpp"

namespace ventcast::harness {

// Every artifact of a run lives under one directory.
struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path config() const { return root / "config.cfg"; }
  std::filesystem::path tables(const config::RunConfig& cfg) const;
  std::filesystem::path cohort() const { return root / "cohort" / "cohort.jsonl"; }
  std::filesystem::path tally() const { return root / "cohort" / "tally.txt"; }
  std::filesystem::path stats() const { return root / "cohort" / "stats.txt"; }
  std::filesystem::path vocab() const { return root / "pretrain" / "vocab.txt"; }
  std::filesystem::path encoder() const { return root / "pretrain" / "encoder.cxln"; }
  std::filesystem::path loss_trace() const { return root / "pretrain" / "loss.csv"; }
  std::filesystem::path corpus_ids() const { return root / "pretrain" / "corpus_ids.txt"; }
  std::filesystem::path seed_dir(cohort::Task task, std::uint64_t seed) const;
  std::filesystem::path tuned(cohort::Task task, std::uint64_t seed) const { return seed_dir(task, seed) / "meta.cxln"; }
  std::filesystem::path meta_log(cohort::Task task, std::uint64_t seed) const { return seed_dir(task, seed) / "meta.json"; }
  std::filesystem::path embeddings(cohort::Task task, std::uint64_t seed) const { return seed_dir(task, seed) / "embeddings.jsonl"; }
  std::filesystem::path aggregator(cohort::Task task, std::uint64_t seed, agg::Pooling pooling) const;
  std::filesystem::path predictions(cohort::Task task, std::uint64_t seed, agg::Pooling pooling) const;
  std::filesystem::path seed_metrics(cohort::Task task, std::uint64_t seed) const { return seed_dir(task, seed) / "metrics.json"; }
  std::filesystem::path metrics() const { return root / "metrics.json"; }
  std::filesystem::path report() const { return root / "report.txt"; }
};

struct MetricsReport {
  cohort::Task task;
  agg::Pooling model;
  std::vector<std::uint64_t> seeds;
  std::vector<double> aurocs;
  double mean = 0.0;
  double sd = 0.0;
  std::string config_hash;
};

using Log = std::function<void(const std::string&)>;

// Raised by run_experiment; keeps the original kind and message.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause) : Error(cause.kind(), cause.what()), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// Each stage reads the files of the stages before it and writes its own.
cohort::SynthSummary stage_synth(const config::RunConfig& cfg, const RunPaths& paths);
cohort::Selection stage_cohort(const config::RunConfig& cfg, const RunPaths& paths);
void stage_pretrain(const config::RunConfig& cfg, const RunPaths& paths, const Log& log = {});
void stage_meta(const config::RunConfig& cfg, const RunPaths& paths, cohort::Task task, std::uint64_t seed, const Log& log = {});
void stage_embed(const config::RunConfig& cfg, const RunPaths& paths, cohort::Task task, std::uint64_t seed);
void stage_finetune(const config::RunConfig& cfg, const RunPaths& paths, cohort::Task task, std::uint64_t seed, const Log& log = {});
// Holdout AUROC per aggregator.
std::map<agg::Pooling, double> stage_evaluate(const config::RunConfig& cfg, const RunPaths& paths, cohort::Task task,
                                              std::uint64_t seed);
std::vector<MetricsReport> stage_report(const config::RunConfig& cfg, const RunPaths& paths);

// synth (when no tables are configured), cohort, pretrain, then per task and
// seed meta-finetune, embed, finetune and evaluate, then report. Errors are
// re-raised tagged with the failing stage; files already written remain.
std::vector<MetricsReport> run_experiment(const config::RunConfig& cfg, const RunPaths& paths, const Log& log = {});

std::vector<cohort::CohortExample> read_cohort(const std::filesystem::path& path);
void write_cohort(const std::filesystem::path& path, const std::vector<cohort::CohortExample>& cohort);
Split split_cohort(const config::RunConfig& cfg, const std::vector<cohort::CohortExample>& cohort, std::uint64_t seed);

std::string format_report(const std::vector<MetricsReport>& reports);

}  // namespace ventcast::harness
