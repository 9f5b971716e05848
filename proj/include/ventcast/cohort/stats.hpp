#pragma once

#include <string>
#include <vector>

#include "ventcast/cohort/records.hpp"

namespace ventcast::cohort {

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, 0 below two values
};

MeanSd mean_sd(const std::vector<double>& values);

struct CategoryCount {
  std::string value;
  std::size_t count = 0;
  double percent = 0.0;
};

struct StatsColumn {
  std::string name;
  std::size_t admissions = 0;
  MeanSd age;
  std::vector<CategoryCount> sex;
  std::vector<CategoryCount> ethnicity;
  MeanSd word_count;  // per note
  MeanSd note_count;  // per patient
};

// Columns: All, PMV+, PMV-, Mortality+, Mortality-.
struct CohortStats {
  std::vector<StatsColumn> columns;
};

std::size_t word_count(const std::string& text);
CohortStats cohort_stats(const std::vector<CohortExample>& cohort);
std::string format_stats(const CohortStats& stats);

}  // namespace ventcast::cohort
