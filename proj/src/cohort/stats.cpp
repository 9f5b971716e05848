#include "ventcast/cohort/stats.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>

#include "ventcast/error.hpp"

namespace ventcast::cohort {

MeanSd mean_sd(const std::vector<double>& values) {
  MeanSd out;
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return out;
}

std::size_t word_count(const std::string& text) {
  std::size_t n = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    const bool space = std::isspace(c) != 0;
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

namespace {

std::vector<CategoryCount> categories(const std::vector<const CohortExample*>& members, const std::set<std::string>& levels,
                                      std::string CohortExample::*field) {
  std::map<std::string, std::size_t> counts;
  for (const auto& level : levels) counts[level] = 0;
  for (const auto* m : members) ++counts[m->*field];
  std::vector<CategoryCount> out;
  for (const auto& [value, count] : counts) {
    const double pct = members.empty() ? 0.0 : 100.0 * static_cast<double>(count) / static_cast<double>(members.size());
    out.push_back({value, count, pct});
  }
  return out;
}

}  // namespace

CohortStats cohort_stats(const std::vector<CohortExample>& cohort) {
  if (cohort.empty()) fail(ErrorKind::validation, "cohort statistics need at least one patient");
  std::set<std::string> sexes, ethnicities;
  for (const auto& ex : cohort) {
    sexes.insert(ex.sex);
    ethnicities.insert(ex.ethnicity);
  }

  const std::vector<std::pair<std::string, std::function<bool(const CohortExample&)>>> splits{
      {"All", [](const CohortExample&) { return true; }},
      {"PMV+", [](const CohortExample& e) { return e.pmv; }},
      {"PMV-", [](const CohortExample& e) { return !e.pmv; }},
      {"Mortality+", [](const CohortExample& e) { return e.mortality; }},
      {"Mortality-", [](const CohortExample& e) { return !e.mortality; }},
  };

  CohortStats stats;
  for (const auto& [name, keep] : splits) {
    std::vector<const CohortExample*> members;
    for (const auto& ex : cohort) {
      if (keep(ex)) members.push_back(&ex);
    }
    StatsColumn col;
    col.name = name;
    col.admissions = members.size();
    std::vector<double> ages, words, counts;
    for (const auto* m : members) {
      ages.push_back(m->age);
      counts.push_back(static_cast<double>(m->notes.size()));
      for (const auto& n : m->notes) words.push_back(static_cast<double>(word_count(n.text)));
    }
    col.age = mean_sd(ages);
    col.word_count = mean_sd(words);
    col.note_count = mean_sd(counts);
    col.sex = categories(members, sexes, &CohortExample::sex);
    col.ethnicity = categories(members, ethnicities, &CohortExample::ethnicity);
    stats.columns.push_back(std::move(col));
  }
  return stats;
}

std::string format_stats(const CohortStats& stats) {
  char buf[64];
  auto cell = [&](const char* fmt, double a, double b) {
    std::snprintf(buf, sizeof(buf), fmt, a, b);
    return std::string(buf);
  };
  auto pad = [](std::string s, std::size_t width) {
    if (s.size() < width) s.insert(0, width - s.size(), ' ');
    return s;
  };
  const std::size_t label_width = 28, width = 18;

  std::vector<std::pair<std::string, std::vector<std::string>>> rows;
  auto add = [&](const std::string& label, auto cell_of) {
    std::vector<std::string> cells;
    for (const auto& c : stats.columns) cells.push_back(cell_of(c));
    rows.emplace_back(label, std::move(cells));
  };
  add("Admissions", [](const StatsColumn& c) { return std::to_string(c.admissions); });
  add("Age, mean (sd)", [&](const StatsColumn& c) { return cell("%.2f (%.2f)", c.age.mean, c.age.sd); });
  for (std::size_t i = 0; i < stats.columns.front().sex.size(); ++i) {
    add("Sex " + stats.columns.front().sex[i].value + ", n (%)", [&](const StatsColumn& c) {
      return cell("%.0f (%.1f)", static_cast<double>(c.sex[i].count), c.sex[i].percent);
    });
  }
  for (std::size_t i = 0; i < stats.columns.front().ethnicity.size(); ++i) {
    add("Ethnicity " + stats.columns.front().ethnicity[i].value + ", n (%)", [&](const StatsColumn& c) {
      return cell("%.0f (%.1f)", static_cast<double>(c.ethnicity[i].count), c.ethnicity[i].percent);
    });
  }
  add("Word count, mean (sd)", [&](const StatsColumn& c) { return cell("%.2f (%.2f)", c.word_count.mean, c.word_count.sd); });
  add("Note count, mean (sd)", [&](const StatsColumn& c) { return cell("%.2f (%.2f)", c.note_count.mean, c.note_count.sd); });

  std::string out = pad("", label_width);
  for (const auto& c : stats.columns) out += pad(c.name, width);
  out += "\n";
  for (const auto& [label, cells] : rows) {
    std::string line = label;
    line.resize(std::max(label_width, label.size()), ' ');
    for (const auto& c : cells) line += pad(c, width);
    out += line + "\n";
  }
  return out;
}

}  // namespace ventcast::cohort
