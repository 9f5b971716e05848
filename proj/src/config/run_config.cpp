#include "ventcast/config/run_config.hpp"

#include <functional>
#include <map>
#include <set>

#include "ventcast/error.hpp"
#include "ventcast/io/container.hpp"
#include "ventcast/io/values.hpp"

namespace ventcast::config {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& value, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : value + sep) {
    if (c == sep) {
      if (auto t = trim(cur); !t.empty()) out.push_back(t);
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

template <class T>
std::string join(const std::vector<T>& items, const std::function<std::string(const T&)>& show) {
  std::string out;
  for (const auto& item : items) out += (out.empty() ? "" : ",") + show(item);
  return out;
}

struct Binding {
  std::string section;
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

Binding count(std::string section, std::string key, std::size_t RunConfig::*field) {
  auto name = section + "." + key;
  return {section, key, [field](const RunConfig& c) { return std::to_string(c.*field); },
          [field, name](RunConfig& c, const std::string& v) { c.*field = io::parse_count(name, v); }};
}

Binding u64(std::string section, std::string key, std::uint64_t RunConfig::*field) {
  auto name = section + "." + key;
  return {section, key, [field](const RunConfig& c) { return std::to_string(c.*field); },
          [field, name](RunConfig& c, const std::string& v) { c.*field = io::parse_u64(name, v); }};
}

Binding real(std::string section, std::string key, double RunConfig::*field) {
  auto name = section + "." + key;
  return {section, key, [field](const RunConfig& c) { return io::format_real(c.*field); },
          [field, name](RunConfig& c, const std::string& v) { c.*field = io::parse_real(name, v); }};
}

Binding text(std::string section, std::string key, std::string RunConfig::*field) {
  return {section, key, [field](const RunConfig& c) { return c.*field; },
          [field](RunConfig& c, const std::string& v) { c.*field = v; }};
}

template <class Owner, class T>
Binding nested_count(std::string section, std::string key, Owner RunConfig::*owner, T Owner::*field) {
  auto name = section + "." + key;
  return {section, key, [=](const RunConfig& c) { return std::to_string(c.*owner.*field); },
          [=](RunConfig& c, const std::string& v) { c.*owner.*field = static_cast<T>(io::parse_u64(name, v)); }};
}

template <class Owner>
Binding nested_real(std::string section, std::string key, Owner RunConfig::*owner, double Owner::*field) {
  auto name = section + "." + key;
  return {section, key, [=](const RunConfig& c) { return io::format_real(c.*owner.*field); },
          [=](RunConfig& c, const std::string& v) { c.*owner.*field = io::parse_real(name, v); }};
}

const std::vector<Binding>& bindings() {
  using encoder::EncoderConfig;
  using cohort::SynthConfig;
  static const std::vector<Binding> all{
      text("data", "tables", &RunConfig::tables),
      text("data", "corpus", &RunConfig::corpus),

      nested_count("synth", "patients", &RunConfig::synth, &SynthConfig::patients),
      nested_real("synth", "excluded_fraction", &RunConfig::synth, &SynthConfig::excluded_fraction),
      {"synth", "signal", [](const RunConfig& c) { return cohort::to_string(c.synth.signal); },
       [](RunConfig& c, const std::string& v) { c.synth.signal = cohort::parse_signal(v); }},
      nested_real("synth", "strength", &RunConfig::synth, &SynthConfig::strength),
      nested_real("synth", "word_mean", &RunConfig::synth, &SynthConfig::word_mean),
      nested_real("synth", "word_sd", &RunConfig::synth, &SynthConfig::word_sd),
      nested_real("synth", "length_scale", &RunConfig::synth, &SynthConfig::length_scale),
      nested_real("synth", "note_mean", &RunConfig::synth, &SynthConfig::note_mean),
      nested_real("synth", "note_sd", &RunConfig::synth, &SynthConfig::note_sd),
      nested_real("synth", "note_scale", &RunConfig::synth, &SynthConfig::note_scale),
      nested_real("synth", "pmv_rate", &RunConfig::synth, &SynthConfig::pmv_rate),
      nested_real("synth", "mortality_rate", &RunConfig::synth, &SynthConfig::mortality_rate),
      nested_count("synth", "sentinel_window", &RunConfig::synth, &SynthConfig::sentinel_window),
      u64("synth", "seed", &RunConfig::synth_seed),

      count("vocab", "min_frequency", &RunConfig::vocab_min_frequency),
      count("vocab", "max_size", &RunConfig::vocab_max_size),

      nested_count("encoder", "n_layers", &RunConfig::encoder, &EncoderConfig::n_layers),
      nested_count("encoder", "d_model", &RunConfig::encoder, &EncoderConfig::d_model),
      nested_count("encoder", "n_heads", &RunConfig::encoder, &EncoderConfig::n_heads),
      nested_count("encoder", "d_head", &RunConfig::encoder, &EncoderConfig::d_head),
      nested_count("encoder", "d_inner", &RunConfig::encoder, &EncoderConfig::d_inner),
      nested_count("encoder", "max_len", &RunConfig::encoder, &EncoderConfig::max_len),
      nested_count("encoder", "mem_len", &RunConfig::encoder, &EncoderConfig::mem_len),
      nested_real("encoder", "predict_fraction", &RunConfig::encoder, &EncoderConfig::predict_fraction),
      nested_real("encoder", "dropout", &RunConfig::encoder, &EncoderConfig::dropout),

      count("pretrain", "steps", &RunConfig::pretrain_steps),
      count("pretrain", "batch", &RunConfig::pretrain_batch),
      real("pretrain", "lr", &RunConfig::pretrain_lr),
      u64("pretrain", "seed", &RunConfig::pretrain_seed),

      count("meta", "epochs", &RunConfig::meta_epochs),
      count("meta", "batch", &RunConfig::meta_batch),
      real("meta", "lr", &RunConfig::meta_lr),
      count("meta", "patience", &RunConfig::meta_patience),

      count("finetune", "layers", &RunConfig::finetune_layers),
      count("finetune", "batch", &RunConfig::finetune_batch),
      real("finetune", "lr", &RunConfig::finetune_lr),
      count("finetune", "hidden_size", &RunConfig::finetune_hidden),
      count("finetune", "predictor_hidden", &RunConfig::finetune_predictor_hidden),
      count("finetune", "patience", &RunConfig::finetune_patience),
      count("finetune", "max_epochs", &RunConfig::finetune_max_epochs),
      {"finetune", "pooling",
       [](const RunConfig& c) { return join<agg::Pooling>(c.poolings, [](const agg::Pooling& p) { return agg::to_string(p); }); },
       [](RunConfig& c, const std::string& v) {
         c.poolings.clear();
         for (const auto& item : split_list(v, ',')) c.poolings.push_back(agg::parse_pooling(item));
       }},

      nested_real("split", "holdout", &RunConfig::split, &harness::SplitSpec::holdout_fraction),
      {"split", "ratio",
       [](const RunConfig& c) { return std::to_string(c.split.train_ratio) + ":" + std::to_string(c.split.val_ratio); },
       [](RunConfig& c, const std::string& v) {
         const auto parts = split_list(v, ':');
         if (parts.size() != 2) fail(ErrorKind::parse, "split.ratio must look like 8:1, got '" + v + "'");
         c.split.train_ratio = io::parse_count("split.ratio", parts[0]);
         c.split.val_ratio = io::parse_count("split.ratio", parts[1]);
       }},
      nested_count("split", "holdout_seed", &RunConfig::split, &harness::SplitSpec::holdout_seed),
      {"split", "seeds",
       [](const RunConfig& c) { return join<std::uint64_t>(c.seeds, [](const std::uint64_t& s) { return std::to_string(s); }); },
       [](RunConfig& c, const std::string& v) {
         c.seeds.clear();
         for (const auto& item : split_list(v, ',')) c.seeds.push_back(io::parse_u64("split.seeds", item));
       }},

      {"task", "tasks",
       [](const RunConfig& c) { return join<cohort::Task>(c.tasks, [](const cohort::Task& t) { return cohort::to_string(t); }); },
       [](RunConfig& c, const std::string& v) {
         c.tasks.clear();
         for (const auto& item : split_list(v, ',')) c.tasks.push_back(cohort::parse_task(item));
       }},
  };
  return all;
}

}  // namespace

void RunConfig::validate() const {
  synth.validate();
  encoder::EncoderConfig probe = encoder;
  probe.validate();
  split.validate();
  if (pretrain_batch == 0 || meta_batch == 0) fail(ErrorKind::config, "batch sizes must be positive");
  if (!(pretrain_lr > 0 && meta_lr > 0)) fail(ErrorKind::config, "learning rates must be positive");
  if (vocab_min_frequency == 0) fail(ErrorKind::config, "vocab.min_frequency must be at least 1");
  for (auto pooling : poolings) aggregator(pooling).validate();
  if (poolings.empty()) fail(ErrorKind::config, "finetune.pooling names no aggregator");
  if (seeds.empty()) fail(ErrorKind::config, "split.seeds is empty");
  if (tasks.empty()) fail(ErrorKind::config, "task.tasks is empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) fail(ErrorKind::config, "split.seeds repeats a seed");
}

std::string RunConfig::to_text() const {
  std::string out, section;
  for (const auto& b : bindings()) {
    if (b.section != section) {
      out += (out.empty() ? "[" : "\n[") + b.section + "]\n";
      section = b.section;
    }
    out += b.key + " = " + b.get(*this) + "\n";
  }
  return out;
}

std::string RunConfig::hash() const { return io::hex64(io::fnv1a(to_text())); }

agg::AggregatorConfig RunConfig::aggregator(agg::Pooling pooling) const {
  agg::AggregatorConfig a;
  a.input_size = encoder.d_model;
  a.hidden_size = finetune_hidden;
  a.n_layers = finetune_layers;
  a.predictor_hidden = finetune_predictor_hidden;
  a.pooling = pooling;
  a.batch_size = finetune_batch;
  a.lr = finetune_lr;
  a.max_epochs = finetune_max_epochs;
  a.patience = finetune_patience;
  return a;
}

RunConfig parse_run_config(const std::string& content, const std::string& source) {
  std::map<std::pair<std::string, std::string>, const Binding*> index;
  std::set<std::string> sections;
  for (const auto& b : bindings()) {
    index[{b.section, b.key}] = &b;
    sections.insert(b.section);
  }
  RunConfig c;
  std::string section;
  std::set<std::pair<std::string, std::string>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    auto end = content.find('\n', pos);
    if (end == std::string::npos) end = content.size();
    const auto line = trim(content.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    const auto where = source + ":" + std::to_string(line_no) + ": ";
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(ErrorKind::config, where + "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!sections.contains(section)) fail(ErrorKind::config, where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::config, where + "expected key = value");
    if (section.empty()) fail(ErrorKind::config, where + "key outside any section");
    const auto key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    auto it = index.find({section, key});
    if (it == index.end()) fail(ErrorKind::config, where + "unknown key '" + key + "' in [" + section + "]");
    if (!seen.insert({section, key}).second) fail(ErrorKind::config, where + "duplicate key '" + key + "'");
    try {
      it->second->set(c, value);
    } catch (const Error& e) {
      fail(ErrorKind::config, where + e.what());
    }
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(io::read_file(path), path.string());
}

}  // namespace ventcast::config
