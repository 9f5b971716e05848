#include "ventcast/harness/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include <json.hpp>

#include "ventcast/cohort/stats.hpp"
#include "ventcast/cohort/synth.hpp"
#include "ventcast/cohort/tables.hpp"
#include "ventcast/encoder/pretrain.hpp"
#include "ventcast/error.hpp"
#include "ventcast/harness/metrics.hpp"
#include "ventcast/io/container.hpp"
#include "ventcast/repr/note_repr.hpp"

namespace ventcast::harness {

using cohort::Task;
using nlohmann::json;

std::filesystem::path RunPaths::tables(const config::RunConfig& cfg) const {
  return cfg.tables.empty() ? root / "data" : std::filesystem::path(cfg.tables);
}

std::filesystem::path RunPaths::seed_dir(Task task, std::uint64_t seed) const {
  return root / cohort::to_string(task) / ("seed-" + std::to_string(seed));
}

std::filesystem::path RunPaths::aggregator(Task task, std::uint64_t seed, agg::Pooling pooling) const {
  return seed_dir(task, seed) / ("aggregator-" + agg::to_string(pooling) + ".cxla");
}

std::filesystem::path RunPaths::predictions(Task task, std::uint64_t seed, agg::Pooling pooling) const {
  return seed_dir(task, seed) / ("predictions-" + agg::to_string(pooling) + ".csv");
}

namespace {

void snapshot(const config::RunConfig& cfg, const RunPaths& paths) { io::write_file(paths.config(), cfg.to_text()); }

void say(const Log& log, const std::string& message) {
  if (log) log(message);
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::vector<repr::LabeledNote> labeled_notes(const std::vector<cohort::CohortExample>& cohort, const std::vector<std::string>& ids,
                                             Task task) {
  const std::set<std::string> keep(ids.begin(), ids.end());
  std::vector<repr::LabeledNote> out;
  for (const auto& ex : cohort) {
    if (!keep.contains(ex.patient_id)) continue;
    for (const auto& n : ex.notes) out.push_back({n, cohort::label_for(ex, task)});
  }
  return out;
}

std::vector<agg::PatientSequence> sequences_for(const std::vector<agg::PatientSequence>& all,
                                                const std::vector<cohort::CohortExample>& cohort,
                                                const std::vector<std::string>& ids, Task task) {
  std::map<std::string, const agg::PatientSequence*> by_id;
  for (const auto& s : all) by_id[s.patient_id] = &s;
  std::map<std::string, bool> labels;
  for (const auto& ex : cohort) labels[ex.patient_id] = cohort::label_for(ex, task);
  std::vector<agg::PatientSequence> out;
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) fail(ErrorKind::validation, "no embeddings for patient " + id);
    auto seq = *it->second;
    seq.label = labels.at(id);
    out.push_back(std::move(seq));
  }
  return out;
}

template <class Fn>
auto tagged(const std::string& stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw StageError(stage, e);
  }
}

}  // namespace

void write_cohort(const std::filesystem::path& path, const std::vector<cohort::CohortExample>& cohort) {
  std::string out;
  for (const auto& ex : cohort) {
    json notes = json::array();
    for (const auto& n : ex.notes) {
      notes.push_back({{"note_id", n.note_id}, {"chart_time", io::format_timestamp(n.chart_time)}, {"category", n.category}, {"text", n.text}});
    }
    json j = {{"patient_id", ex.patient_id}, {"age", ex.age},         {"sex", ex.sex},
              {"ethnicity", ex.ethnicity},   {"pmv", ex.pmv},         {"mortality", ex.mortality},
              {"first_stay_id", ex.first_stay_id}, {"vent_start", io::format_timestamp(ex.vent_start)}, {"notes", notes}};
    out += j.dump() + "\n";
  }
  io::write_file(path, out);
}

std::vector<cohort::CohortExample> read_cohort(const std::filesystem::path& path) {
  const auto content = io::read_file(path);
  std::vector<cohort::CohortExample> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < content.size()) {
    auto end = content.find('\n', pos);
    if (end == std::string::npos) end = content.size();
    const auto line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      cohort::CohortExample ex;
      ex.patient_id = j.at("patient_id").get<std::string>();
      ex.age = j.at("age").get<double>();
      ex.sex = j.at("sex").get<std::string>();
      ex.ethnicity = j.at("ethnicity").get<std::string>();
      ex.pmv = j.at("pmv").get<bool>();
      ex.mortality = j.at("mortality").get<bool>();
      ex.first_stay_id = j.at("first_stay_id").get<std::string>();
      ex.vent_start = io::parse_timestamp(j.at("vent_start").get<std::string>());
      for (const auto& n : j.at("notes")) {
        ex.notes.push_back({n.at("note_id").get<std::string>(), ex.patient_id, io::parse_timestamp(n.at("chart_time").get<std::string>()),
                            n.at("category").get<std::string>(), n.at("text").get<std::string>()});
      }
      out.push_back(std::move(ex));
    } catch (const json::exception& e) {
      fail(ErrorKind::parse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

Split split_cohort(const config::RunConfig& cfg, const std::vector<cohort::CohortExample>& cohort, std::uint64_t seed) {
  std::vector<std::string> ids;
  for (const auto& ex : cohort) ids.push_back(ex.patient_id);
  auto s = split(ids, cfg.split, seed);
  check_disjoint(s);
  return s;
}

cohort::SynthSummary stage_synth(const config::RunConfig& cfg, const RunPaths& paths) {
  snapshot(cfg, paths);
  return cohort::synth_generate(cfg.synth, cfg.synth_seed, paths.tables(cfg));
}

cohort::Selection stage_cohort(const config::RunConfig& cfg, const RunPaths& paths) {
  snapshot(cfg, paths);
  auto selection = cohort::select_cohort(cohort::load_tables(paths.tables(cfg)));
  write_cohort(paths.cohort(), selection.cohort);
  io::write_file(paths.tally(), cohort::format_tally(selection));
  if (!selection.cohort.empty()) io::write_file(paths.stats(), cohort::format_stats(cohort::cohort_stats(selection.cohort)));
  return selection;
}

void stage_pretrain(const config::RunConfig& cfg, const RunPaths& paths, const Log& log) {
  snapshot(cfg, paths);
  const auto cohort = read_cohort(paths.cohort());
  const auto holdout_ids = split_cohort(cfg, cohort, cfg.seeds.front()).holdout;
  const std::set<std::string> holdout(holdout_ids.begin(), holdout_ids.end());

  std::vector<encoder::CorpusEntry> corpus;
  std::set<std::string> holdout_notes;
  for (const auto& ex : cohort) {
    for (const auto& n : ex.notes) {
      if (holdout.contains(ex.patient_id)) holdout_notes.insert(n.note_id);
      else corpus.push_back({n.note_id, n.text});
    }
  }
  if (!cfg.corpus.empty()) {
    const auto extra = io::read_file(cfg.corpus);
    std::size_t pos = 0, line_no = 0;
    while (pos < extra.size()) {
      auto end = extra.find('\n', pos);
      if (end == std::string::npos) end = extra.size();
      ++line_no;
      if (end > pos) corpus.push_back({"corpus:" + std::to_string(line_no), extra.substr(pos, end - pos)});
      pos = end + 1;
    }
  }
  std::vector<std::string> texts;
  std::string ids;
  for (const auto& c : corpus) {
    texts.push_back(c.text);
    ids += c.note_id + "\n";
  }
  const auto vocab = text::Vocabulary::build(texts, cfg.vocab_min_frequency, cfg.vocab_max_size);
  std::filesystem::create_directories(paths.vocab().parent_path());
  vocab.save(paths.vocab());

  encoder::PretrainOptions options;
  options.steps = cfg.pretrain_steps;
  options.batch_size = cfg.pretrain_batch;
  options.lr = cfg.pretrain_lr;
  options.seed = cfg.pretrain_seed;
  if (log) {
    options.on_step = [&](std::size_t step, double loss) {
      if (step % 100 == 0 || step == cfg.pretrain_steps) log("pretrain step " + std::to_string(step) + " loss " + fixed3(loss));
    };
  }
  auto config = cfg.encoder;
  config.vocab_size = vocab.size();
  auto result = encoder::pretrain(corpus, vocab, config, options, holdout_notes);
  result.model.save(paths.encoder());
  encoder::write_loss_trace(paths.loss_trace(), result.loss_trace);
  io::write_file(paths.corpus_ids(), ids);
}

void stage_meta(const config::RunConfig& cfg, const RunPaths& paths, Task task, std::uint64_t seed, const Log& log) {
  snapshot(cfg, paths);
  const auto cohort = read_cohort(paths.cohort());
  const auto s = split_cohort(cfg, cohort, seed);
  const auto pretrained = encoder::EncoderModel::load(paths.encoder());
  const auto train = labeled_notes(cohort, s.train, task), val = labeled_notes(cohort, s.val, task);

  repr::MetaOptions options;
  options.epochs = cfg.meta_epochs;
  options.batch_size = cfg.meta_batch;
  options.lr = cfg.meta_lr;
  options.seed = seed;
  options.patience = cfg.meta_patience;
  options.on_epoch = [&](std::size_t epoch, double auc) {
    say(log, cohort::to_string(task) + " seed " + std::to_string(seed) + " meta epoch " + std::to_string(epoch) + " val auroc " + fixed3(auc));
  };
  auto result = repr::meta_finetune(pretrained, train, val, options);
  repr::save_tuned(paths.tuned(task, seed), result.model, result.head, cohort::to_string(task));
  json j = {{"task", cohort::to_string(task)},
            {"seed", seed},
            {"val_auroc", result.val_auroc},
            {"best_epoch", result.best_epoch ? json(*result.best_epoch) : json(nullptr)}};
  io::write_file(paths.meta_log(task, seed), j.dump() + "\n");
}

void stage_embed(const config::RunConfig& cfg, const RunPaths& paths, Task task, std::uint64_t seed) {
  snapshot(cfg, paths);
  const auto cohort = read_cohort(paths.cohort());
  const auto tuned = repr::load_tuned(paths.tuned(task, seed));
  std::vector<repr::NoteEmbedding> all;
  for (const auto& ex : cohort) {
    auto e = repr::embed_patient(tuned.model, ex.notes);
    all.insert(all.end(), e.begin(), e.end());
  }
  repr::write_embeddings(paths.embeddings(task, seed), all);
}

void stage_finetune(const config::RunConfig& cfg, const RunPaths& paths, Task task, std::uint64_t seed, const Log& log) {
  snapshot(cfg, paths);
  const auto cohort = read_cohort(paths.cohort());
  const auto s = split_cohort(cfg, cohort, seed);
  const auto all = agg::group_by_patient(repr::read_embeddings(paths.embeddings(task, seed)));
  const auto train = sequences_for(all, cohort, s.train, task), val = sequences_for(all, cohort, s.val, task);
  const auto tuned_path = paths.tuned(task, seed);
  const auto checksum = [&] { return io::fnv1a(io::read_file(tuned_path)); };

  for (auto pooling : cfg.poolings) {
    agg::FinetuneOptions options;
    options.seed = seed;
    options.encoder_checksum = checksum;
    options.on_epoch = [&](std::size_t epoch, double auc) {
      say(log, cohort::to_string(task) + " seed " + std::to_string(seed) + " " + agg::to_string(pooling) + " epoch " +
                   std::to_string(epoch) + " val auroc " + fixed3(auc));
    };
    auto result = agg::finetune(train, val, cfg.aggregator(pooling), options);
    result.model.save(paths.aggregator(task, seed, pooling),
                      {{"task", cohort::to_string(task)},
                       {"encoder_checksum", io::hex64(checksum())},
                       {"best_epoch", result.best_epoch ? std::to_string(*result.best_epoch) : "none"}});
  }
}

std::map<agg::Pooling, double> stage_evaluate(const config::RunConfig& cfg, const RunPaths& paths, Task task, std::uint64_t seed) {
  snapshot(cfg, paths);
  const auto cohort = read_cohort(paths.cohort());
  const auto s = split_cohort(cfg, cohort, seed);
  const auto all = agg::group_by_patient(repr::read_embeddings(paths.embeddings(task, seed)));
  const auto holdout = sequences_for(all, cohort, s.holdout, task);
  std::vector<double> labels;
  for (const auto& p : holdout) labels.push_back(*p.label ? 1.0 : 0.0);

  std::map<agg::Pooling, double> out;
  json aurocs = json::object();
  for (auto pooling : cfg.poolings) {
    const auto model = agg::Aggregator::load(paths.aggregator(task, seed, pooling));
    const auto probs = agg::predict_patients(model, holdout);
    std::vector<agg::Prediction> predictions;
    for (std::size_t i = 0; i < holdout.size(); ++i) predictions.push_back({holdout[i].patient_id, cohort::to_string(task), probs[i], holdout[i].label});
    agg::write_predictions(paths.predictions(task, seed, pooling), predictions);
    out[pooling] = auroc(probs, labels);
    aurocs[agg::to_string(pooling)] = out[pooling];
  }
  json j = {{"task", cohort::to_string(task)}, {"seed", seed}, {"config_hash", cfg.hash()}, {"holdout_size", holdout.size()}, {"auroc", aurocs}};
  io::write_file(paths.seed_metrics(task, seed), j.dump(2) + "\n");
  return out;
}

std::vector<MetricsReport> stage_report(const config::RunConfig& cfg, const RunPaths& paths) {
  snapshot(cfg, paths);
  std::vector<MetricsReport> reports;
  json results = json::array();
  for (auto task : cfg.tasks) {
    for (auto pooling : cfg.poolings) {
      MetricsReport r{task, pooling, {}, {}, 0.0, 0.0, cfg.hash()};
      for (auto seed : cfg.seeds) {
        const auto j = json::parse(io::read_file(paths.seed_metrics(task, seed)));
        r.seeds.push_back(seed);
        r.aurocs.push_back(j.at("auroc").at(agg::to_string(pooling)).get<double>());
      }
      const auto s = summarize(r.aurocs);
      r.mean = s.mean;
      r.sd = s.sd;
      results.push_back({{"task", cohort::to_string(task)},
                         {"model", agg::to_string(pooling)},
                         {"seeds", r.seeds},
                         {"aurocs", r.aurocs},
                         {"mean", r.mean},
                         {"sd", r.sd}});
      reports.push_back(std::move(r));
    }
  }
  json metrics = {{"config_hash", cfg.hash()}, {"results", results}};
  io::write_file(paths.metrics(), metrics.dump(2) + "\n");
  io::write_file(paths.report(), format_report(reports));
  return reports;
}

std::string format_report(const std::vector<MetricsReport>& reports) {
  std::vector<Task> tasks;
  std::vector<agg::Pooling> models;
  for (const auto& r : reports) {
    if (std::find(tasks.begin(), tasks.end(), r.task) == tasks.end()) tasks.push_back(r.task);
    if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
  }
  auto pad = [](std::string s, std::size_t w) {
    // Column widths count code points; the plus-minus sign is two bytes.
    std::size_t shown = 0;
    for (unsigned char c : s) shown += (c & 0xC0) != 0x80;
    if (shown < w) s.append(w - shown, ' ');
    return s;
  };
  std::string out = pad("Model", 18);
  for (auto t : tasks) out += pad(t == Task::pmv ? "PMV" : "Mortality", 18);
  while (out.back() == ' ') out.pop_back();
  out += "\n";
  for (auto m : models) {
    std::string line = pad(m == agg::Pooling::bilstm ? "encoder + Bi-LSTM" : "encoder + mean", 18);
    for (auto t : tasks) {
      std::string cell = "-";
      for (const auto& r : reports) {
        if (r.task == t && r.model == m) cell = format_mean_sd({r.mean, r.sd});
      }
      line += pad(cell, 18);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  if (!reports.empty()) {
    std::string seeds;
    for (auto s : reports.front().seeds) seeds += (seeds.empty() ? "" : ",") + std::to_string(s);
    out += "\nHoldout AUROC, mean \xC2\xB1 sample sd over seeds " + seeds + "; config " + reports.front().config_hash + "\n";
  }
  return out;
}

std::vector<MetricsReport> run_experiment(const config::RunConfig& cfg, const RunPaths& paths, const Log& log) {
  cfg.validate();
  if (cfg.tables.empty()) {
    tagged("synth", [&] { return stage_synth(cfg, paths); });
    say(log, "synth: wrote " + paths.tables(cfg).string());
  }
  tagged("cohort", [&] {
    auto sel = stage_cohort(cfg, paths);
    say(log, "cohort: " + std::to_string(sel.cohort.size()) + " of " + std::to_string(sel.input_patients) + " patients included");
    return 0;
  });
  tagged("pretrain", [&] { stage_pretrain(cfg, paths, log); return 0; });
  for (auto task : cfg.tasks) {
    for (auto seed : cfg.seeds) {
      tagged("meta-finetune", [&] { stage_meta(cfg, paths, task, seed, log); return 0; });
      tagged("embed", [&] { stage_embed(cfg, paths, task, seed); return 0; });
      tagged("finetune", [&] { stage_finetune(cfg, paths, task, seed, log); return 0; });
      tagged("evaluate", [&] {
        for (const auto& [pooling, auc] : stage_evaluate(cfg, paths, task, seed)) {
          say(log, cohort::to_string(task) + " seed " + std::to_string(seed) + " " + agg::to_string(pooling) + " holdout auroc " + fixed3(auc));
        }
        return 0;
      });
    }
  }
  return tagged("report", [&] { return stage_report(cfg, paths); });
}

}  // namespace ventcast::harness
