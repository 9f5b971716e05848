#include <filesystem>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "cohort_oracle.hpp"
#include "doctest.h"
#include "scratch_dir.hpp"
#include "ventcast/cohort/rules.hpp"
#include "ventcast/cohort/stats.hpp"
#include "ventcast/cohort/synth.hpp"
#include "ventcast/cohort/tables.hpp"
#include "ventcast/error.hpp"
#include "ventcast/io/container.hpp"

using namespace ventcast;
using namespace ventcast::cohort;
using std::chrono::hours;
using std::chrono::minutes;
using std::chrono::seconds;

namespace {

const std::filesystem::path kFixtures = VENTCAST_FIXTURES;

Timestamp ts(const char* text) { return io::parse_timestamp(text); }
Day day_of(const char* date) { return std::chrono::floor<std::chrono::days>(ts(date)); }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void copy_fixture(const std::string& name, const std::filesystem::path& dst) {
  for (const auto& e : std::filesystem::directory_iterator(kFixtures / name)) std::filesystem::copy_file(e.path(), dst / e.path().filename());
}

ErrorKind kind_of(const std::function<void()>& fn, std::string* message = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::internal;
}

}  // namespace

TEST_CASE("load_tables reads the five-row fixture exactly") {
  auto t = load_tables(kFixtures / "five_rows");
  REQUIRE(t.patients.size() == 5);
  CHECK(t.row_counts.at("patients.csv") == 5);
  CHECK(t.row_counts.at("notes.csv") == 1);

  const auto& p1 = t.patients.at("P1");
  CHECK(p1.age == 34.0);
  CHECK(p1.sex == "F");
  CHECK(p1.ethnicity == "WHITE");
  CHECK_FALSE(p1.death_time.has_value());
  REQUIRE(p1.admissions.size() == 1);
  CHECK(p1.admissions[0].admission_id == "A1");
  CHECK(p1.admissions[0].admit_time == ts("2150-01-01T00:00:00Z"));
  CHECK(p1.admissions[0].discharge_time == ts("2150-01-10T00:00:00Z"));
  CHECK_FALSE(p1.admissions[0].organ_donor);
  REQUIRE(p1.icu_stays.size() == 1);
  CHECK(p1.icu_stays[0].in_time == ts("2150-01-01T02:00:00Z"));
  REQUIRE(p1.vent_events.size() == 1);
  CHECK(p1.vent_events[0].stay_id == "S1");
  CHECK(p1.vent_events[0].interval.end == ts("2150-01-02T05:00:00Z"));
  REQUIRE(p1.notes.size() == 1);
  CHECK(p1.notes[0].text == "Pt stable, vent \"AC\" mode.\nFamily at bedside.");
  CHECK(p1.notes[0].category == "Nursing");

  const auto& p2 = t.patients.at("P2");
  CHECK(p2.age == 71.5);
  CHECK(*p2.death_time == ts("2150-05-02T08:00:00Z"));
  CHECK(p2.admissions[0].organ_donor);
  CHECK(p2.exclusion_diagnoses == std::set<std::string>{"neoplasm"});

  const auto& p3 = t.patients.at("P3");
  CHECK(p3.ethnicity == "HISPANIC, OTHER");
  CHECK(p3.admissions[0].external_transfer);
  CHECK(p3.icu_stays.empty());

  CHECK(*t.patients.at("P4").death_time == ts("2150-07-19T23:59:59Z"));
  CHECK(t.patients.at("P5").age == 0.0);
  CHECK(t.patients.at("P5").admissions.empty());
}

TEST_CASE("load_tables edge cases and errors") {
  auto empty = load_tables(kFixtures / "empty_notes");
  CHECK(empty.row_counts.at("notes.csv") == 0);
  CHECK(empty.patients.at("E01").notes.empty());

  std::string message;
  CHECK(kind_of([] { load_tables(kFixtures / "does_not_exist"); }) == ErrorKind::io);

  {
    testing::ScratchDir dir("reversed");
    copy_fixture("five_rows", dir.path());
    io::write_file(dir / "ventevents.csv",
                   "patient_id,stay_id,start_time,end_time\n"
                   "P1,S1,2150-01-01T22:00:00Z,2150-01-02T05:00:00Z\n"
                   "P2,S2,2150-04-03T00:00:00Z,2150-04-02T00:00:00Z\n");
    CHECK(kind_of([&] { load_tables(dir.path()); }, &message) == ErrorKind::validation);
    CHECK(message.find("ventevents.csv:3") != std::string::npos);
  }
  {
    testing::ScratchDir dir("badtime");
    copy_fixture("five_rows", dir.path());
    io::write_file(dir / "admissions.csv",
                   "admission_id,patient_id,admit_time,discharge_time,organ_donor,external_transfer\n"
                   "A1,P1,01/01/2150,2150-01-10T00:00:00Z,0,0\n");
    CHECK(kind_of([&] { load_tables(dir.path()); }, &message) == ErrorKind::parse);
    CHECK(message.find("admissions.csv:2") != std::string::npos);
  }
  {
    testing::ScratchDir dir("short");
    copy_fixture("five_rows", dir.path());
    io::write_file(dir / "diagnoses.csv", "patient_id,exclusion_tag\nP1\n");
    CHECK(kind_of([&] { load_tables(dir.path()); }, &message) == ErrorKind::parse);
    CHECK(message.find(":2") != std::string::npos);
  }
  {
    testing::ScratchDir dir("orphan");
    copy_fixture("five_rows", dir.path());
    io::write_file(dir / "diagnoses.csv", "patient_id,exclusion_tag\nP9,burns\n");
    CHECK(kind_of([&] { load_tables(dir.path()); }) == ErrorKind::validation);
  }
  {
    testing::ScratchDir dir("header");
    copy_fixture("five_rows", dir.path());
    io::write_file(dir / "diagnoses.csv", "patient,tag\n");
    CHECK(kind_of([&] { load_tables(dir.path()); }) == ErrorKind::parse);
  }
}

TEST_CASE("write_tables round trips") {
  auto t = load_tables(kFixtures / "flowchart");
  testing::ScratchDir dir("roundtrip");
  write_tables(dir.path(), t);
  auto back = load_tables(dir.path());
  CHECK(back.row_counts == t.row_counts);
  CHECK(format_tally(select_cohort(back)) == format_tally(select_cohort(t)));
}

TEST_CASE("daily_vent_hours examples") {
  std::vector<Interval> none;
  CHECK(daily_vent_hours(none, day_of("2150-01-01T00:00:00")) == 0.0);

  std::vector<Interval> whole{{ts("2150-01-01T00:00:00"), ts("2150-01-02T00:00:00")}};
  CHECK(daily_vent_hours(whole, day_of("2150-01-01T00:00:00")) == 24.0);
  CHECK(daily_vent_hours(whole, day_of("2150-01-02T00:00:00")) == 0.0);

  std::vector<Interval> night{{ts("2150-01-01T22:00:00"), ts("2150-01-02T05:00:00")}};
  CHECK(daily_vent_hours(night, day_of("2150-01-01T00:00:00")) == 2.0);
  CHECK(daily_vent_hours(night, day_of("2150-01-02T00:00:00")) == 5.0);

  std::vector<Interval> overlap{{ts("2150-01-01T01:00:00"), ts("2150-01-01T05:00:00")},
                                {ts("2150-01-01T03:00:00"), ts("2150-01-01T08:00:00")}};
  CHECK(daily_vent_hours(overlap, day_of("2150-01-01T00:00:00")) == 7.0);
}

TEST_CASE("label_pmv examples") {
  auto run = [](std::vector<double> per_day) {
    std::vector<Interval> ev;
    auto d = ts("2150-01-01T06:00:00");
    for (double h : per_day) {
      ev.push_back({d, d + seconds(static_cast<std::int64_t>(h * 3600))});
      d += std::chrono::days(1);
    }
    return ev;
  };
  CHECK(label_pmv(run(std::vector<double>(8, 7.0))));
  CHECK_FALSE(label_pmv(run(std::vector<double>(7, 7.0))));
  CHECK(label_pmv(run({7, 7, 7, 7, 3, 7, 7, 7, 7})));
  CHECK_FALSE(label_pmv(run({7, 7, 7, 7, 3, 7, 7, 7})));
  CHECK(label_pmv(run(std::vector<double>(8, 6.0))));  // at least 6 hours qualifies
  CHECK(qualifying_days(run(std::vector<double>(8, 6.0)), 6.0, true) == 0);
  std::vector<Interval> none;
  CHECK_FALSE(label_pmv(none));
}

TEST_CASE("label_mortality boundaries") {
  const auto in = ts("2150-01-01T10:00:00");
  CHECK_FALSE(label_mortality(in, std::nullopt));
  CHECK(label_mortality(in, in + std::chrono::days(89)));
  CHECK(label_mortality(in, in + std::chrono::days(90)));
  CHECK_FALSE(label_mortality(in, in + std::chrono::days(90) + seconds(1)));
  CHECK(label_mortality(in, in));
  CHECK(kind_of([&] { label_mortality(in, in - seconds(1)); }) == ErrorKind::validation);
}

TEST_CASE("window_notes boundaries, categories and order") {
  const auto vs = ts("2150-01-01T10:00:00");
  std::vector<Note> notes{{"n3", "p", vs + hours(47) + minutes(59), "Nursing", ""},
                          {"n4", "p", vs + hours(48), "Nursing", ""},
                          {"n5", "p", vs + hours(1), "Physician", ""},
                          {"n2", "p", vs + hours(2), "RESPIRATORY", ""},
                          {"n1", "p", vs + hours(2), "nursing/other", ""},
                          {"n0", "p", vs - seconds(1), "Nursing", ""},
                          {"n6", "p", vs, "Nursing", ""}};
  auto kept = window_notes(notes, vs);
  std::vector<std::string> ids;
  for (const auto& n : kept) ids.push_back(n.note_id);
  CHECK(ids == std::vector<std::string>{"n6", "n1", "n2", "n3"});
}

TEST_CASE("flowchart fixture matches the hand walk") {
  auto sel = select_cohort(load_tables(kFixtures / "flowchart"));
  CHECK(sel.input_patients == 6);
  std::map<std::string, std::size_t> tally;
  for (const auto& s : sel.tally) tally[to_string(s.stage)] = s.excluded;
  CHECK(tally == std::map<std::string, std::size_t>{{"age", 1}, {"organ_donor", 1}, {"external_transfer", 1},
                                                    {"exclusion_diagnosis", 1}, {"mv_duration", 1},
                                                    {"first_icu_stay", 0}, {"no_notes", 0}});
  CHECK(sel.excluded.at("P01") == Stage::age);
  CHECK(sel.excluded.at("P02") == Stage::organ_donor);
  CHECK(sel.excluded.at("P03") == Stage::external_transfer);
  CHECK(sel.excluded.at("P04") == Stage::exclusion_diagnosis);
  CHECK(sel.excluded.at("P05") == Stage::mv_duration);
  REQUIRE(sel.cohort.size() == 1);
  const auto& ex = sel.cohort[0];
  CHECK(ex.patient_id == "P06");
  CHECK(ex.pmv);
  CHECK(ex.mortality);
  CHECK(ex.first_stay_id == "SP06");
  CHECK(ex.vent_start == ts("2150-03-07T06:00:00"));
  std::vector<std::string> ids;
  for (const auto& n : ex.notes) ids.push_back(n.note_id);
  CHECK(ids == std::vector<std::string>{"N6a", "N6b", "N6c", "N6d"});

  auto b = select_cohort(load_tables(kFixtures / "flowchart_b"));
  CHECK(b.excluded.at("Q01") == Stage::first_icu_stay);
  CHECK(b.excluded.at("Q02") == Stage::no_notes);
  REQUIRE(b.cohort.size() == 1);
  CHECK(b.cohort[0].patient_id == "Q03");
  CHECK_FALSE(b.cohort[0].pmv);        // the readmission's ventilation does not count
  CHECK_FALSE(b.cohort[0].mortality);  // 90 days + 1 s
}

TEST_CASE("rules agree with the minute-grid interpreter on random fixtures") {
  std::mt19937_64 rng(20240611);
  std::size_t included = 0, checked_deaths = 0;
  for (int batch = 0; batch < 20; ++batch) {
    Tables t;
    for (int i = 0; i < 100; ++i) {
      auto p = testing::random_patient(rng, "R" + std::to_string(batch * 100 + i));
      t.patients.emplace(p.patient_id, p);
    }
    std::map<std::string, testing::OracleOutcome> expect;
    bool any_error = false;
    for (const auto& [id, p] : t.patients) {
      expect[id] = testing::oracle_walk(p);
      any_error |= expect[id].death_error;
      std::vector<Interval> all;
      for (const auto& v : p.vent_events) all.push_back(v.interval);
      REQUIRE(label_pmv(all) == testing::oracle_pmv(all));
      REQUIRE(qualifying_days(all, 6.0, true) == testing::oracle_days(all, 360, true));
    }
    if (any_error) {
      CHECK_THROWS_AS(select_cohort(t), Error);
      for (auto it = t.patients.begin(); it != t.patients.end();) {
        it = expect[it->first].death_error ? t.patients.erase(it) : std::next(it);
      }
    }
    auto sel = select_cohort(t);
    std::size_t excluded_total = 0;
    for (const auto& s : sel.tally) excluded_total += s.excluded;
    CHECK(excluded_total + sel.cohort.size() == sel.input_patients);
    for (const auto& ex : sel.cohort) {
      const auto& o = expect.at(ex.patient_id);
      REQUIRE(o.stage.empty());
      CHECK(ex.pmv == o.pmv);
      CHECK(ex.mortality == o.mortality);
      std::vector<std::string> ids;
      for (const auto& n : ex.notes) ids.push_back(n.note_id);
      CHECK(ids == o.note_ids);
      checked_deaths += t.patients.at(ex.patient_id).death_time.has_value();
      ++included;
    }
    for (const auto& [id, stage] : sel.excluded) CHECK(expect.at(id).stage == to_string(stage));
  }
  CHECK(included > 50);
  CHECK(checked_deaths > 20);
}

TEST_CASE("cohort_stats") {
  auto make = [](std::string id, double age, std::string sex, bool pmv, bool mort, std::vector<std::string> texts) {
    CohortExample ex;
    ex.patient_id = id;
    ex.age = age;
    ex.sex = sex;
    ex.ethnicity = "WHITE";
    ex.pmv = pmv;
    ex.mortality = mort;
    for (const auto& t : texts) ex.notes.push_back({id + t, id, {}, "Nursing", t});
    return ex;
  };
  std::vector<CohortExample> one{make("a", 50, "M", true, false, {"one two"})};
  auto s1 = cohort_stats(one);
  CHECK(s1.columns[0].age.sd == 0.0);
  CHECK(s1.columns[0].note_count.sd == 0.0);

  std::vector<CohortExample> four{make("a", 20, "M", true, false, {"w w", "w w w w"}),
                                  make("b", 30, "F", false, false, {"w"}),
                                  make("c", 40, "F", true, true, {"w w w", "w", "w w"}),
                                  make("d", 70, "M", false, true, {"w w w w w w"})};
  auto s = cohort_stats(four);
  REQUIRE(s.columns.size() == 5);
  const auto& all = s.columns[0];
  CHECK(all.admissions == 4);
  CHECK(all.age.mean == doctest::Approx(40.0).epsilon(1e-12));
  CHECK(all.age.sd == doctest::Approx(std::sqrt(1400.0 / 3.0)).epsilon(1e-12));
  // words per note: 2 4 1 3 1 2 6 -> mean 19/7
  CHECK(std::abs(all.word_count.mean - 19.0 / 7.0) < 1e-9);
  double ss = 0;
  for (double w : {2.0, 4.0, 1.0, 3.0, 1.0, 2.0, 6.0}) ss += (w - 19.0 / 7.0) * (w - 19.0 / 7.0);
  CHECK(std::abs(all.word_count.sd - std::sqrt(ss / 6.0)) < 1e-9);
  CHECK(std::abs(all.note_count.mean - 7.0 / 4.0) < 1e-9);
  CHECK(std::abs(all.note_count.sd - std::sqrt((0.0625 + 0.5625 * 2 + 1.5625) / 3.0)) < 1e-9);

  const auto& pmv_pos = s.columns[1];
  CHECK(pmv_pos.admissions == 2);
  CHECK(std::abs(pmv_pos.age.mean - 30.0) < 1e-9);
  CHECK(std::abs(pmv_pos.age.sd - std::sqrt(200.0)) < 1e-9);
  for (const auto& col : s.columns) {
    double sex_total = 0;
    for (const auto& c : col.sex) sex_total += c.percent;
    CHECK(std::abs(sex_total - 100.0) < 1e-9);
  }
  CHECK(format_stats(s).find("Age, mean (sd)") != std::string::npos);

  std::vector<CohortExample> empty;
  CHECK_THROWS_AS(cohort_stats(empty), Error);
}

TEST_CASE("synth generator: determinism and planted keyword labels") {
  SynthConfig cfg;
  cfg.patients = 120;
  testing::ScratchDir a("synth_a"), b("synth_b");
  auto summary = synth_generate(cfg, 7, a.path());
  synth_generate(cfg, 7, b.path());
  CHECK(summary.included == 120);
  CHECK(summary.excluded == 12);
  for (const char* f : {"patients.csv", "admissions.csv", "icustays.csv", "ventevents.csv", "diagnoses.csv", "notes.csv", "manifest.jsonl"}) {
    CHECK(slurp(a / f) == slurp(b / f));
  }

  auto sel = select_cohort(load_tables(a.path()));
  CHECK(sel.cohort.size() == 120);
  std::map<std::string, nlohmann::json> manifest;
  std::istringstream lines(slurp(a / "manifest.jsonl"));
  for (std::string line; std::getline(lines, line);) {
    auto j = nlohmann::json::parse(line);
    manifest[j["patient_id"].get<std::string>()] = j;
  }
  for (const auto& [id, stage] : sel.excluded) CHECK(manifest.at(id)["excluded_stage"] == to_string(stage));
  for (const auto& s : sel.tally) CHECK(s.excluded > 0);

  const std::regex pmv_re("\\b" + keyword_sentinel(Task::pmv) + "\\b"), mort_re("\\b" + keyword_sentinel(Task::mortality) + "\\b");
  std::size_t positives = 0;
  for (const auto& ex : sel.cohort) {
    bool pmv_text = false, mort_text = false;
    for (const auto& n : ex.notes) {
      pmv_text |= std::regex_search(n.text, pmv_re);
      mort_text |= std::regex_search(n.text, mort_re);
    }
    CHECK(pmv_text == ex.pmv);
    CHECK(mort_text == ex.mortality);
    CHECK(manifest.at(ex.patient_id)["labels"]["pmv"] == ex.pmv);
    CHECK(manifest.at(ex.patient_id)["labels"]["mortality"] == ex.mortality);
    positives += ex.pmv;
  }
  CHECK(positives > 30);
  CHECK(positives < 90);

  SynthConfig other = cfg;
  other.patients = 30;
  testing::ScratchDir c("synth_c");
  synth_generate(other, 8, c.path());
  CHECK(slurp(c / "notes.csv") != slurp(a / "notes.csv"));
}

TEST_CASE("synth generator: temporal order and calibration") {
  SynthConfig cfg;
  cfg.patients = 200;
  cfg.excluded_fraction = 0.0;
  cfg.signal = Signal::temporal;
  testing::ScratchDir dir("synth_t");
  synth_generate(cfg, 3, dir.path());
  auto sel = select_cohort(load_tables(dir.path()));
  REQUIRE(sel.cohort.size() == 200);
  const auto [a, b] = order_sentinels(Task::pmv);
  const std::regex a_re("\\b" + a + "\\b"), b_re("\\b" + b + "\\b");
  std::vector<double> counts, words;
  for (const auto& ex : sel.cohort) {
    std::optional<std::size_t> first_a, first_b;
    for (std::size_t i = 0; i < ex.notes.size(); ++i) {
      if (!first_a && std::regex_search(ex.notes[i].text, a_re)) first_a = i;
      if (!first_b && std::regex_search(ex.notes[i].text, b_re)) first_b = i;
      words.push_back(static_cast<double>(word_count(ex.notes[i].text)));
    }
    REQUIRE(first_a.has_value());
    REQUIRE(first_b.has_value());
    CHECK((*first_a < *first_b) == ex.pmv);
    counts.push_back(static_cast<double>(ex.notes.size()));
  }
  auto c = mean_sd(counts);
  CHECK(c.mean > 8.5);
  CHECK(c.mean < 11.0);
  auto w = mean_sd(words);
  CHECK(w.mean > 14.0);
  CHECK(w.mean < 22.0);

  SynthConfig bad = cfg;
  bad.strength = 1.5;
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK_THROWS_AS(parse_signal("loud"), Error);
}
