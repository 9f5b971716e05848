#include "ventcast/cohort/rules.hpp"

#include <algorithm>
#include <cctype>

#include "ventcast/error.hpp"

namespace ventcast::cohort {

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<Interval> intervals_of(std::span<const VentEvent> events) {
  std::vector<Interval> out;
  out.reserve(events.size());
  for (const auto& e : events) out.push_back(e.interval);
  return out;
}

}  // namespace

void SelectionRules::validate() const {
  if (min_age < 0 || mv_min_days <= 0 || mv_min_hours <= 0 || pmv_more_than_days <= 0 || pmv_min_hours <= 0 ||
      mortality_horizon_days <= 0 || note_window_hours <= 0) {
    fail(ErrorKind::config, "selection thresholds must be positive");
  }
  if (note_categories.empty()) fail(ErrorKind::config, "no note categories selected");
}

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::age: return "age";
    case Stage::organ_donor: return "organ_donor";
    case Stage::external_transfer: return "external_transfer";
    case Stage::exclusion_diagnosis: return "exclusion_diagnosis";
    case Stage::mv_duration: return "mv_duration";
    case Stage::first_icu_stay: return "first_icu_stay";
    case Stage::no_notes: return "no_notes";
  }
  return "unknown";
}

double daily_vent_hours(std::span<const Interval> events, Day day) {
  const Timestamp lo = day, hi = day + std::chrono::days(1);
  std::vector<std::pair<Timestamp, Timestamp>> clipped;
  for (const auto& e : events) {
    const auto s = std::max(e.start, lo), t = std::min(e.end, hi);
    if (s < t) clipped.emplace_back(s, t);
  }
  std::sort(clipped.begin(), clipped.end());
  std::chrono::seconds covered{0};
  Timestamp reach = lo;
  for (const auto& [s, t] : clipped) {
    const auto from = std::max(s, reach);
    if (t > from) {
      covered += t - from;
      reach = t;
    }
  }
  return static_cast<double>(covered.count()) / 3600.0;
}

int qualifying_days(std::span<const Interval> events, double min_hours, bool strict) {
  std::set<Day> touched;
  for (const auto& e : events) {
    if (!(e.start < e.end)) continue;
    const auto last = std::chrono::floor<std::chrono::days>(e.end - std::chrono::seconds(1));
    for (auto d = std::chrono::floor<std::chrono::days>(e.start); d <= last; d += std::chrono::days(1)) touched.insert(d);
  }
  int count = 0;
  for (const auto& d : touched) {
    const double h = daily_vent_hours(events, d);
    if (strict ? h > min_hours : h >= min_hours) ++count;
  }
  return count;
}

bool label_pmv(std::span<const Interval> events, const SelectionRules& rules) {
  return qualifying_days(events, rules.pmv_min_hours, false) > rules.pmv_more_than_days;
}

bool label_mortality(Timestamp first_icu_in, const std::optional<Timestamp>& death, const SelectionRules& rules) {
  if (!death) return false;
  if (*death < first_icu_in) fail(ErrorKind::validation, "death_time precedes the first ICU admission");
  return *death - first_icu_in <= std::chrono::days(rules.mortality_horizon_days);
}

std::vector<Note> window_notes(std::span<const Note> notes, Timestamp vent_start, const SelectionRules& rules) {
  const auto end = vent_start + std::chrono::hours(rules.note_window_hours);
  std::vector<Note> out;
  for (const auto& n : notes) {
    if (n.chart_time < vent_start || n.chart_time >= end) continue;
    if (!rules.note_categories.contains(lower(n.category))) continue;
    out.push_back(n);
  }
  std::sort(out.begin(), out.end(), [](const Note& a, const Note& b) {
    return a.chart_time != b.chart_time ? a.chart_time < b.chart_time : a.note_id < b.note_id;
  });
  return out;
}

Selection select_cohort(const Tables& tables, const SelectionRules& rules) {
  rules.validate();
  Selection out;
  out.input_patients = tables.patients.size();
  for (auto stage : kStages) out.tally.push_back({stage, 0});
  auto exclude = [&](const std::string& id, Stage stage) {
    out.excluded.emplace(id, stage);
    ++out.tally[static_cast<std::size_t>(stage)].excluded;
  };

  for (const auto& [id, p] : tables.patients) {
    if (p.age < rules.min_age) {
      exclude(id, Stage::age);
      continue;
    }
    if (rules.exclude_organ_donors &&
        std::any_of(p.admissions.begin(), p.admissions.end(), [](const Admission& a) { return a.organ_donor; })) {
      exclude(id, Stage::organ_donor);
      continue;
    }
    if (rules.exclude_transfers &&
        std::any_of(p.admissions.begin(), p.admissions.end(), [](const Admission& a) { return a.external_transfer; })) {
      exclude(id, Stage::external_transfer);
      continue;
    }
    if (std::any_of(p.exclusion_diagnoses.begin(), p.exclusion_diagnoses.end(),
                    [&](const std::string& tag) { return rules.excluded_tags.contains(tag); })) {
      exclude(id, Stage::exclusion_diagnosis);
      continue;
    }
    const auto all_vent = intervals_of(p.vent_events);
    if (qualifying_days(all_vent, rules.mv_min_hours, true) < rules.mv_min_days) {
      exclude(id, Stage::mv_duration);
      continue;
    }

    const auto first = std::min_element(p.icu_stays.begin(), p.icu_stays.end(), [](const IcuStay& a, const IcuStay& b) {
      return a.in_time != b.in_time ? a.in_time < b.in_time : a.stay_id < b.stay_id;
    });
    std::vector<Interval> stay_vent;
    if (first != p.icu_stays.end()) {
      for (const auto& e : p.vent_events) {
        if (e.stay_id == first->stay_id) stay_vent.push_back(e.interval);
      }
    }
    if (stay_vent.empty()) {
      exclude(id, Stage::first_icu_stay);
      continue;
    }
    const auto vent_start =
        std::min_element(stay_vent.begin(), stay_vent.end(), [](const Interval& a, const Interval& b) { return a.start < b.start; })
            ->start;

    auto notes = window_notes(p.notes, vent_start, rules);
    if (notes.empty()) {
      exclude(id, Stage::no_notes);
      continue;
    }

    CohortExample ex;
    ex.patient_id = id;
    ex.age = p.age;
    ex.sex = p.sex;
    ex.ethnicity = p.ethnicity;
    ex.notes = std::move(notes);
    ex.pmv = label_pmv(stay_vent, rules);
    try {
      ex.mortality = label_mortality(first->in_time, p.death_time, rules);
    } catch (const Error& e) {
      fail(e.kind(), "patient " + id + ": " + e.what());
    }
    ex.first_stay_id = first->stay_id;
    ex.vent_start = vent_start;
    out.cohort.push_back(std::move(ex));
  }
  return out;
}

std::string format_tally(const Selection& selection) {
  std::string out = "input " + std::to_string(selection.input_patients) + "\n";
  for (const auto& s : selection.tally) out += "excluded " + to_string(s.stage) + " " + std::to_string(s.excluded) + "\n";
  out += "included " + std::to_string(selection.cohort.size()) + "\n";
  return out;
}

}  // namespace ventcast::cohort
