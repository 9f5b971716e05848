#pragma once

#include <chrono>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ventcast/cohort/records.hpp"

namespace ventcast::cohort {

using Day = std::chrono::sys_days;

struct SelectionRules {
  double min_age = 18.0;
  // Inclusion: at least `mv_min_days` UTC days with strictly more than
  // `mv_min_hours` ventilated hours.
  int mv_min_days = 2;
  double mv_min_hours = 6.0;
  // PMV label: more than `pmv_more_than_days` days with at least
  // `pmv_min_hours` hours.
  int pmv_more_than_days = 7;
  double pmv_min_hours = 6.0;
  std::int64_t mortality_horizon_days = 90;
  std::int64_t note_window_hours = 48;
  std::set<std::string> excluded_tags{"neuromuscular", "neoplasm", "burns"};
  std::set<std::string> note_categories{"nursing", "nursing/other", "respiratory"};
  bool exclude_organ_donors = true;
  bool exclude_transfers = true;

  void validate() const;
};

enum class Stage { age, organ_donor, external_transfer, exclusion_diagnosis, mv_duration, first_icu_stay, no_notes };
inline constexpr Stage kStages[] = {Stage::age,          Stage::organ_donor,    Stage::external_transfer,
                                    Stage::exclusion_diagnosis, Stage::mv_duration, Stage::first_icu_stay,
                                    Stage::no_notes};
std::string to_string(Stage stage);

struct StageCount {
  Stage stage;
  std::size_t excluded = 0;
};

struct Selection {
  std::vector<CohortExample> cohort;  // ascending patient id
  std::size_t input_patients = 0;
  std::vector<StageCount> tally;      // in application order
  std::map<std::string, Stage> excluded;
};

// Hours of [day, day+24h) covered by the union of the intervals.
double daily_vent_hours(std::span<const Interval> events, Day day);
// Days touched by any interval whose covered hours pass the threshold
// (`strict` selects > instead of >=).
int qualifying_days(std::span<const Interval> events, double min_hours, bool strict);

bool label_pmv(std::span<const Interval> events, const SelectionRules& rules = {});
// Throws a validation error when death precedes the ICU admission.
bool label_mortality(Timestamp first_icu_in, const std::optional<Timestamp>& death, const SelectionRules& rules = {});

std::vector<Note> window_notes(std::span<const Note> notes, Timestamp vent_start, const SelectionRules& rules = {});

Selection select_cohort(const Tables& tables, const SelectionRules& rules = {});
std::string format_tally(const Selection& selection);

}  // namespace ventcast::cohort
