#include "ventcast/cohort/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <random>
#include <set>

#include <json.hpp>

#include "ventcast/cohort/rules.hpp"
#include "ventcast/cohort/tables.hpp"
#include "ventcast/error.hpp"
#include "ventcast/io/container.hpp"

namespace ventcast::cohort {

std::string to_string(Signal signal) {
  switch (signal) {
    case Signal::none: return "none";
    case Signal::keyword: return "keyword";
    case Signal::temporal: return "temporal";
  }
  return "unknown";
}

Signal parse_signal(const std::string& name) {
  if (name == "none") return Signal::none;
  if (name == "keyword") return Signal::keyword;
  if (name == "temporal") return Signal::temporal;
  fail(ErrorKind::config, "unknown signal '" + name + "' (expected none, keyword or temporal)");
}

std::string keyword_sentinel(Task task) { return task == Task::pmv ? "zephyrpmv" : "zephyrmort"; }

std::pair<std::string, std::string> order_sentinels(Task task) {
  return task == Task::pmv ? std::pair<std::string, std::string>{"alphapmv", "omegapmv"}
                           : std::pair<std::string, std::string>{"alphamort", "omegamort"};
}

void SynthConfig::validate() const {
  if (patients == 0) fail(ErrorKind::config, "synth.patients must be positive");
  if (!(excluded_fraction >= 0.0 && excluded_fraction <= 1.0)) fail(ErrorKind::config, "synth.excluded_fraction must be in [0,1]");
  if (!(strength >= 0.0 && strength <= 1.0)) fail(ErrorKind::config, "synth.strength must be in [0,1]");
  if (!(word_mean > 0 && word_sd >= 0 && length_scale > 0)) fail(ErrorKind::config, "synth word-count settings must be positive");
  if (!(note_mean > 0 && note_sd >= 0 && note_scale > 0)) fail(ErrorKind::config, "synth note-count settings must be positive");
  if (!(pmv_rate >= 0 && pmv_rate <= 1 && mortality_rate >= 0 && mortality_rate <= 1)) {
    fail(ErrorKind::config, "synth label rates must be in [0,1]");
  }
  if (sentinel_window == 0) fail(ErrorKind::config, "synth.sentinel_window must be positive");
}

namespace {

const std::vector<std::string> kWords{
    "patient", "vent", "settings", "unchanged", "sedation", "propofol", "fentanyl", "suctioned", "moderate", "amount",
    "thick", "white", "secretions", "breath", "sounds", "coarse", "diminished", "bases", "bilaterally", "lungs",
    "clear", "upper", "lobes", "peep", "fio2", "tidal", "volume", "rate", "pressure", "support", "assist", "control",
    "mode", "weaning", "trial", "tolerated", "abg", "ph", "pco2", "po2", "saturation", "stable", "overnight", "family",
    "updated", "at", "bedside", "plan", "continue", "current", "regimen", "monitor", "closely", "heart", "rhythm",
    "sinus", "tachycardia", "blood", "map", "goal", "levophed", "titrated", "off", "urine", "output", "adequate",
    "foley", "draining", "yellow", "skin", "intact", "turned", "every", "two", "hours", "afebrile", "temp", "max",
    "wbc", "trending", "down", "antibiotics", "vancomycin", "zosyn", "cultures", "pending", "chest", "xray",
    "infiltrates", "ett", "position", "confirmed", "oral", "care", "provided", "neuro", "opens", "eyes", "to",
    "voice", "follows", "commands", "intermittently", "pupils", "equal", "reactive", "gi", "tube", "feeds",
    "residuals", "minimal", "abdomen", "soft", "nondistended", "bowel", "present", "electrolytes",
    "repleted", "potassium", "magnesium", "insulin", "drip", "glucose", "within", "range", "respiratory",
    "therapy", "nebulizer", "albuterol", "given", "no", "acute", "distress", "noted", "will", "reassess", "in",
    "the", "morning", "and", "with", "for", "of", "on", "remains", "intubated", "vented", "comfortable"};

const std::vector<std::string> kAllowedCategories{"Nursing", "Nursing/other", "Respiratory"};
const std::vector<std::string> kOtherCategories{"Physician", "Radiology", "Discharge summary"};
const std::vector<std::string> kEthnicities{"WHITE", "BLACK", "HISPANIC", "ASIAN", "OTHER"};
const std::vector<std::string> kExcludedTags{"neuromuscular", "neoplasm", "burns"};
const std::vector<std::string> kHarmlessTags{"sepsis", "pneumonia", "chf"};

struct Draft {
  Timestamp time;
  std::string category;
  std::vector<std::string> words;
};

class Generator {
 public:
  Generator(const SynthConfig& config, std::uint64_t seed) : cfg_(config), rng_(seed) {
    std::vector<double> weights;
    for (std::size_t i = 0; i < kWords.size(); ++i) weights.push_back(1.0 / static_cast<double>(i + 1));
    word_pick_ = std::discrete_distribution<std::size_t>(weights.begin(), weights.end());
  }

  // Builds one patient; `stage` names the selection stage it must fail.
  PatientRecord patient(std::size_t index, std::optional<Stage> stage, nlohmann::json& manifest) {
    PatientRecord p;
    char id[32];
    std::snprintf(id, sizeof(id), "P%05zu", index + 1);
    p.patient_id = id;
    p.age = stage == Stage::age ? static_cast<double>(integer(14, 17))
                                : std::clamp(std::round(normal(63.0, 16.0)), 18.0, 95.0);
    p.sex = coin(0.56) ? "M" : "F";
    p.ethnicity = kEthnicities[std::discrete_distribution<std::size_t>({70, 10, 5, 5, 10})(rng_)];

    const bool pmv = coin(cfg_.pmv_rate);
    const bool mortality = coin(cfg_.mortality_rate);

    const Timestamp admit = Timestamp(std::chrono::sys_days(std::chrono::year(2130) / 1 / 1)) +
                            std::chrono::days(integer(0, 3650)) + seconds_in(0.0, 24.0);
    const Timestamp icu_in = admit + seconds_in(1.0, 12.0);
    const auto first_day = std::chrono::floor<std::chrono::days>(icu_in) + std::chrono::days(1);

    int qualifying = pmv ? static_cast<int>(integer(8, 14)) : static_cast<int>(integer(2, 7));
    if (stage == Stage::mv_duration) qualifying = 1;
    const auto vent = schedule(first_day, qualifying, static_cast<int>(integer(0, 2)));
    const Timestamp vent_start = vent.front().start;
    const Timestamp icu_out = vent.back().end + seconds_in(2.0, 48.0);

    Admission adm{next_id('A', admissions_), admit, icu_out + seconds_in(24.0, 120.0), stage == Stage::organ_donor,
                  stage == Stage::external_transfer};
    IcuStay stay{next_id('S', stays_), adm.admission_id, icu_in, icu_out};

    if (stage == Stage::first_icu_stay) {
      const Timestamp earlier = admit - std::chrono::days(integer(40, 200));
      Admission prior{next_id('A', admissions_), earlier, earlier + std::chrono::days(5), false, false};
      IcuStay prior_stay{next_id('S', stays_), prior.admission_id, earlier + std::chrono::hours(3), earlier + std::chrono::days(3)};
      p.admissions.push_back(prior);
      p.icu_stays.push_back(prior_stay);
    }
    p.admissions.push_back(adm);
    p.icu_stays.push_back(stay);
    for (const auto& iv : vent) p.vent_events.push_back({stay.stay_id, iv});

    if (mortality) {
      const auto lo = icu_out + std::chrono::hours(1);
      const auto hi = icu_in + std::chrono::days(90);
      p.death_time = lo + std::chrono::seconds(integer(0, (hi - lo).count()));
    } else if (coin(0.5)) {
      p.death_time = icu_in + std::chrono::days(90) + std::chrono::seconds(integer(1, 300LL * 86400));
    } else if (stage != Stage::mv_duration && coin(0.25)) {
      // Readmission whose ventilation must not count towards the labels.
      const Timestamp again = adm.discharge_time + std::chrono::days(integer(30, 300));
      Admission later{next_id('A', admissions_), again, again + std::chrono::days(25), false, false};
      const Timestamp later_in = again + std::chrono::hours(4);
      const auto later_vent = schedule(std::chrono::floor<std::chrono::days>(later_in) + std::chrono::days(1),
                                       static_cast<int>(integer(3, 9)), 0);
      IcuStay later_stay{next_id('S', stays_), later.admission_id, later_in, later_vent.back().end + std::chrono::hours(6)};
      p.admissions.push_back(later);
      p.icu_stays.push_back(later_stay);
      for (const auto& iv : later_vent) p.vent_events.push_back({later_stay.stay_id, iv});
    }

    if (stage == Stage::exclusion_diagnosis) p.exclusion_diagnoses.insert(pick(kExcludedTags));
    if (coin(0.2)) p.exclusion_diagnoses.insert(pick(kHarmlessTags));

    // In-window notes at distinct times, ascending.
    const std::size_t count = note_count();
    std::set<std::int64_t> offsets;
    while (offsets.size() < count) offsets.insert(integer(0, 48LL * 3600 - 1));
    std::vector<Draft> window;
    for (auto off : offsets) window.push_back({vent_start + std::chrono::seconds(off), pick(kAllowedCategories), words(word_count())});

    nlohmann::json causes = nlohmann::json::object(), planted = nlohmann::json::object();
    for (Task task : {Task::pmv, Task::mortality}) {
      const bool label = task == Task::pmv ? pmv : mortality;
      const bool follow = coin(cfg_.strength);
      const auto name = to_string(task);
      if (cfg_.signal == Signal::none) {
        causes[name] = "none";
      } else if (cfg_.signal == Signal::keyword) {
        causes[name] = follow ? "keyword" : "noise";
        const bool present = follow ? label : coin(0.5);
        planted[name] = present;
        if (present) plant(window[index_below(window.size())].words, keyword_sentinel(task));
      } else {
        causes[name] = follow ? "temporal" : "noise";
        const bool first_leads = follow ? label : coin(0.5);
        planted[name] = first_leads;
        auto i = index_below(window.size()), j = index_below(window.size() - 1);
        if (j >= i) ++j;
        if (i > j) std::swap(i, j);
        const auto [a, b] = order_sentinels(task);
        plant(window[i].words, first_leads ? a : b);
        plant(window[j].words, first_leads ? b : a);
      }
    }

    if (stage == Stage::no_notes) {
      for (auto& d : window) d.time += std::chrono::hours(48) + seconds_in(0.0, 48.0);
    }

    std::vector<Draft> distractors;
    const auto n_distract = integer(0, 2);
    for (std::int64_t k = 0; k < n_distract; ++k) {
      Draft d{vent_start, pick(kAllowedCategories), words(word_count())};
      const auto kind = integer(0, 3);
      if (kind == 0) {
        d.category = pick(kOtherCategories);
        d.time = vent_start + seconds_in(0.0, 47.9);
      } else if (kind == 1) {
        d.time = vent_start - seconds_in(0.01, 24.0);
      } else if (kind == 2) {
        d.time = vent_start + std::chrono::hours(48) + seconds_in(0.0, 24.0);
      } else {
        d.time = vent_start + std::chrono::hours(48);
      }
      if (cfg_.signal != Signal::none && coin(0.5)) {
        const Task task = coin(0.5) ? Task::pmv : Task::mortality;
        const auto [a, b] = order_sentinels(task);
        plant(d.words, cfg_.signal == Signal::keyword ? keyword_sentinel(task) : (coin(0.5) ? a : b));
      }
      distractors.push_back(std::move(d));
    }

    for (auto* group : {&window, &distractors}) {
      for (auto& d : *group) p.notes.push_back({next_id('N', notes_), p.patient_id, d.time, d.category, text_of(d.words)});
    }

    manifest = {{"patient_id", p.patient_id},
                {"included", !stage.has_value()},
                {"excluded_stage", stage ? nlohmann::json(to_string(*stage)) : nlohmann::json(nullptr)},
                {"labels", {{"pmv", pmv}, {"mortality", mortality}}},
                {"qualifying_days", qualifying},
                {"signal", to_string(cfg_.signal)},
                {"causes", causes},
                {"planted", planted},
                {"vent_start", io::format_timestamp(vent_start)},
                {"window_notes", stage == Stage::no_notes ? 0 : window.size()}};
    return p;
  }

 private:
  std::int64_t integer(std::int64_t lo, std::int64_t hi) { return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng_); }
  double normal(double mean, double sd) { return std::normal_distribution<double>(mean, sd)(rng_); }
  bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }
  std::size_t index_below(std::size_t n) { return static_cast<std::size_t>(integer(0, static_cast<std::int64_t>(n) - 1)); }
  const std::string& pick(const std::vector<std::string>& v) { return v[index_below(v.size())]; }
  std::chrono::seconds seconds_in(double lo_hours, double hi_hours) {
    return std::chrono::seconds(integer(static_cast<std::int64_t>(lo_hours * 3600), static_cast<std::int64_t>(hi_hours * 3600)));
  }

  std::string next_id(char prefix, std::size_t& counter) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%c%07zu", prefix, ++counter);
    return buf;
  }

  // One event per day starting at first_day; qualifying days carry 7-19.5h,
  // filler days 1-5h. Every event stays inside its calendar day.
  std::vector<Interval> schedule(std::chrono::sys_days first_day, int qualifying, int fillers) {
    std::vector<bool> kinds(static_cast<std::size_t>(qualifying), true);
    kinds.insert(kinds.end(), static_cast<std::size_t>(fillers), false);
    std::shuffle(kinds.begin() + 1, kinds.end(), rng_);
    std::vector<Interval> out;
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      const Timestamp start = Timestamp(first_day + std::chrono::days(k)) + seconds_in(0.0, 4.0);
      out.push_back({start, start + (kinds[k] ? seconds_in(7.0, 19.5) : seconds_in(1.0, 5.0))});
    }
    return out;
  }

  std::size_t note_count() {
    const double mean = cfg_.note_mean * cfg_.note_scale, sd = cfg_.note_sd * cfg_.note_scale;
    const double lo = cfg_.signal == Signal::temporal ? 2.0 : 1.0;
    const double hi = std::max(lo, std::ceil(mean + 3.0 * sd));
    return static_cast<std::size_t>(std::clamp(std::round(normal(mean, sd)), lo, hi));
  }

  std::size_t word_count() {
    const double m = cfg_.word_mean * cfg_.length_scale, s = cfg_.word_sd * cfg_.length_scale;
    const double sigma2 = std::log(1.0 + (s * s) / (m * m));
    const double draw = std::lognormal_distribution<double>(std::log(m) - sigma2 / 2.0, std::sqrt(sigma2))(rng_);
    return static_cast<std::size_t>(std::max(3.0, std::round(draw)));
  }

  std::vector<std::string> words(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(kWords[word_pick_(rng_)]);
    return out;
  }

  void plant(std::vector<std::string>& ws, const std::string& token) {
    const auto limit = std::min(ws.size(), cfg_.sentinel_window - 1);
    ws.insert(ws.begin() + static_cast<std::ptrdiff_t>(integer(0, static_cast<std::int64_t>(limit))), token);
  }

  std::string text_of(const std::vector<std::string>& ws) {
    std::string out;
    std::size_t sentence = 0;
    for (std::size_t i = 0; i < ws.size(); ++i) {
      if (!out.empty()) out += ' ';
      out += ws[i];
      if (++sentence >= 8 && i + 1 < ws.size() && coin(0.3)) {
        out += '.';
        sentence = 0;
      }
    }
    return out + ".";
  }

  const SynthConfig& cfg_;
  std::mt19937_64 rng_;
  std::discrete_distribution<std::size_t> word_pick_;
  std::size_t admissions_ = 0, stays_ = 0, notes_ = 0;
};

}  // namespace

SynthSummary synth_generate(const SynthConfig& config, std::uint64_t seed, const std::filesystem::path& dir) {
  config.validate();
  const auto excluded = static_cast<std::size_t>(std::llround(config.excluded_fraction * static_cast<double>(config.patients)));
  std::vector<std::optional<Stage>> plan(config.patients);
  for (std::size_t i = 0; i < excluded; ++i) plan.emplace_back(kStages[i % std::size(kStages)]);

  Generator gen(config, seed);
  std::shuffle(plan.begin(), plan.end(), std::mt19937_64(seed ^ 0x5bd1e995ULL));

  Tables tables;
  std::string manifest;
  SynthSummary summary;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    nlohmann::json line;
    auto p = gen.patient(i, plan[i], line);
    summary.notes += p.notes.size();
    (plan[i] ? summary.excluded : summary.included) += 1;
    manifest += line.dump() + "\n";
    tables.patients.emplace(p.patient_id, std::move(p));
  }
  write_tables(dir, tables);
  io::write_file(dir / "manifest.jsonl", manifest);
  return summary;
}

}  // namespace ventcast::cohort
