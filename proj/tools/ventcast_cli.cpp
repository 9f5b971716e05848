#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "ventcast/cohort/rules.hpp"
#include "ventcast/config/run_config.hpp"
#include "ventcast/error.hpp"
#include "ventcast/harness/experiment.hpp"

using namespace ventcast;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> task;
  std::string out = "run";
};

void add_flags(CLI::App* sub, Flags& flags) {
  sub->add_option("--config", flags.config, "run configuration file");
  sub->add_option("--seed", flags.seed, "seed override");
  sub->add_option("--task", flags.task, "task override")->check(CLI::IsMember({"pmv", "mortality"}));
  sub->add_option("--out", flags.out, "run directory (CXL_RUN_DIR takes precedence)");
}

// Single line, no embedded newlines.
std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

void report_error(const Error& e, const std::string& stage) {
  std::cerr << "error kind=" << to_string(e.kind()) << " stage=" << stage << " message=" << one_line(e.what()) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clinical-notes ventilation outcome pipeline"};
  app.require_subcommand(1);
  Flags flags;
  const std::pair<const char*, const char*> commands[] = {
      {"synth", "write a synthetic cohort as CSV tables"},
      {"cohort", "apply the selection rules and print the exclusion tally"},
      {"pretrain", "permutation-LM pretraining of the note encoder"},
      {"meta-finetune", "tune the encoder on single notes with patient labels"},
      {"embed", "write frozen note embeddings"},
      {"finetune", "train the note aggregators"},
      {"evaluate", "holdout AUROC per aggregator"},
      {"report", "mean and sd over seeds"},
      {"run", "every stage in order"},
  };
  for (const auto& [name, help] : commands) add_flags(app.add_subcommand(name, help), flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    auto cfg = flags.config.empty() ? config::RunConfig{} : config::load_run_config(flags.config);
    if (flags.seed) {
      if (stage == "synth") cfg.synth_seed = *flags.seed;
      else if (stage == "pretrain") cfg.pretrain_seed = *flags.seed;
      else cfg.seeds = {*flags.seed};
    }
    if (flags.task) cfg.tasks = {cohort::parse_task(*flags.task)};
    cfg.validate();
    const char* env = std::getenv("CXL_RUN_DIR");
    const harness::RunPaths paths{env && *env ? env : flags.out};
    const harness::Log log = [](const std::string& line) { std::cerr << line << "\n"; };

    if (stage == "run") {
      harness::run_experiment(cfg, paths, log);
      std::cout << io::read_file(paths.report());
      return 0;
    }
    if (stage == "synth") {
      const auto s = harness::stage_synth(cfg, paths);
      std::cout << "wrote " << paths.tables(cfg).string() << ": " << s.included << " eligible, " << s.excluded << " ineligible, " << s.notes << " notes\n";
    } else if (stage == "cohort") {
      std::cout << cohort::format_tally(harness::stage_cohort(cfg, paths));
    } else if (stage == "pretrain") {
      harness::stage_pretrain(cfg, paths, log);
    } else if (stage == "report") {
      harness::stage_report(cfg, paths);
      std::cout << io::read_file(paths.report());
    } else {
      for (auto task : cfg.tasks) {
        for (auto seed : cfg.seeds) {
          if (stage == "meta-finetune") harness::stage_meta(cfg, paths, task, seed, log);
          else if (stage == "embed") harness::stage_embed(cfg, paths, task, seed);
          else if (stage == "finetune") harness::stage_finetune(cfg, paths, task, seed, log);
          else {
            for (const auto& [pooling, auc] : harness::stage_evaluate(cfg, paths, task, seed)) {
              std::printf("%s seed %llu %s auroc %.6f\n", cohort::to_string(task).c_str(), static_cast<unsigned long long>(seed),
                          agg::to_string(pooling).c_str(), auc);
            }
          }
        }
      }
    }
    return 0;
  } catch (const harness::StageError& e) {
    report_error(e, e.stage());
  } catch (const Error& e) {
    report_error(e, stage);
  } catch (const std::exception& e) {
    std::cerr << "error kind=internal stage=" << stage << " message=" << one_line(e.what()) << "\n";
  }
  return 1;
}
