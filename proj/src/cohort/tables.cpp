#include "ventcast/cohort/tables.hpp"

#include <algorithm>
#include <cctype>

#include "ventcast/error.hpp"
#include "ventcast/io/container.hpp"
#include "ventcast/io/csv.hpp"

namespace ventcast::cohort {

namespace {

// Row cursor that prefixes every error with file:line.
struct RowContext {
  const std::string& file;
  std::size_t line;

  [[noreturn]] void error(ErrorKind kind, const std::string& message) const {
    fail(kind, file + ":" + std::to_string(line) + ": " + message);
  }

  Timestamp time(const std::string& value, const char* column) const {
    Timestamp t;
    if (!io::try_parse_timestamp(value, t)) error(ErrorKind::parse, std::string(column) + " is not an ISO-8601 UTC timestamp: '" + value + "'");
    return t;
  }

  bool flag(const std::string& value, const char* column) const {
    if (value == "0") return false;
    if (value == "1") return true;
    error(ErrorKind::parse, std::string(column) + " must be 0 or 1, got '" + value + "'");
  }

  void ordered(Timestamp start, Timestamp end, const char* what) const {
    if (!(start < end)) error(ErrorKind::validation, std::string(what) + " ends before it starts");
  }
};

io::CsvTable read_checked(const std::filesystem::path& dir, const std::string& name, const std::vector<std::string>& header) {
  auto table = io::read_csv(dir / name);
  if (!table.header.empty() && table.header[0].starts_with("\xEF\xBB\xBF")) table.header[0].erase(0, 3);
  if (table.header != header) fail(ErrorKind::parse, name + ": unexpected header");
  return table;
}

PatientRecord& patient_of(Tables& tables, const std::string& id, const RowContext& ctx) {
  auto it = tables.patients.find(id);
  if (it == tables.patients.end()) ctx.error(ErrorKind::validation, "unknown patient_id '" + id + "'");
  return it->second;
}

}  // namespace

Tables load_tables(const std::filesystem::path& dir) {
  Tables tables;
  const std::string patients_file = "patients.csv", admissions_file = "admissions.csv", stays_file = "icustays.csv",
                    vent_file = "ventevents.csv", diagnoses_file = "diagnoses.csv", notes_file = "notes.csv";

  auto patients = read_checked(dir, patients_file, kPatientsHeader);
  for (std::size_t r = 0; r < patients.rows.size(); ++r) {
    const auto& row = patients.rows[r];
    RowContext ctx{patients_file, patients.line_numbers[r]};
    PatientRecord p;
    p.patient_id = row[0];
    try {
      std::size_t used = 0;
      p.age = std::stod(row[1], &used);
      if (used != row[1].size()) throw std::invalid_argument(row[1]);
    } catch (const std::exception&) {
      ctx.error(ErrorKind::parse, "age is not a number: '" + row[1] + "'");
    }
    if (p.age < 0) ctx.error(ErrorKind::validation, "negative age");
    p.sex = row[2];
    p.ethnicity = row[3];
    if (!row[4].empty()) p.death_time = ctx.time(row[4], "death_time");
    if (p.patient_id.empty()) ctx.error(ErrorKind::validation, "empty patient_id");
    if (!tables.patients.emplace(p.patient_id, p).second) ctx.error(ErrorKind::validation, "duplicate patient_id '" + p.patient_id + "'");
  }

  std::map<std::string, std::string> admission_owner;
  auto admissions = read_checked(dir, admissions_file, kAdmissionsHeader);
  for (std::size_t r = 0; r < admissions.rows.size(); ++r) {
    const auto& row = admissions.rows[r];
    RowContext ctx{admissions_file, admissions.line_numbers[r]};
    Admission a{row[0], ctx.time(row[2], "admit_time"), ctx.time(row[3], "discharge_time"), ctx.flag(row[4], "organ_donor"),
                ctx.flag(row[5], "external_transfer")};
    ctx.ordered(a.admit_time, a.discharge_time, "admission");
    if (!admission_owner.emplace(a.admission_id, row[1]).second) ctx.error(ErrorKind::validation, "duplicate admission_id '" + a.admission_id + "'");
    patient_of(tables, row[1], ctx).admissions.push_back(a);
  }

  std::map<std::string, std::string> stay_owner;
  auto stays = read_checked(dir, stays_file, kIcuStaysHeader);
  for (std::size_t r = 0; r < stays.rows.size(); ++r) {
    const auto& row = stays.rows[r];
    RowContext ctx{stays_file, stays.line_numbers[r]};
    IcuStay s{row[0], row[1], ctx.time(row[2], "in_time"), ctx.time(row[3], "out_time")};
    ctx.ordered(s.in_time, s.out_time, "icu stay");
    auto owner = admission_owner.find(s.admission_id);
    if (owner == admission_owner.end()) ctx.error(ErrorKind::validation, "unknown admission_id '" + s.admission_id + "'");
    if (!stay_owner.emplace(s.stay_id, owner->second).second) ctx.error(ErrorKind::validation, "duplicate stay_id '" + s.stay_id + "'");
    patient_of(tables, owner->second, ctx).icu_stays.push_back(s);
  }

  auto vents = read_checked(dir, vent_file, kVentEventsHeader);
  for (std::size_t r = 0; r < vents.rows.size(); ++r) {
    const auto& row = vents.rows[r];
    RowContext ctx{vent_file, vents.line_numbers[r]};
    VentEvent v{row[1], {ctx.time(row[2], "start_time"), ctx.time(row[3], "end_time")}};
    ctx.ordered(v.interval.start, v.interval.end, "ventilation event");
    auto owner = stay_owner.find(v.stay_id);
    if (owner == stay_owner.end()) ctx.error(ErrorKind::validation, "unknown stay_id '" + v.stay_id + "'");
    if (owner->second != row[0]) ctx.error(ErrorKind::validation, "stay '" + v.stay_id + "' belongs to another patient");
    patient_of(tables, row[0], ctx).vent_events.push_back(v);
  }

  auto diagnoses = read_checked(dir, diagnoses_file, kDiagnosesHeader);
  for (std::size_t r = 0; r < diagnoses.rows.size(); ++r) {
    const auto& row = diagnoses.rows[r];
    RowContext ctx{diagnoses_file, diagnoses.line_numbers[r]};
    if (row[1].empty()) ctx.error(ErrorKind::validation, "empty exclusion_tag");
    patient_of(tables, row[0], ctx).exclusion_diagnoses.insert(row[1]);
  }

  std::set<std::string> note_ids;
  auto notes = read_checked(dir, notes_file, kNotesHeader);
  for (std::size_t r = 0; r < notes.rows.size(); ++r) {
    const auto& row = notes.rows[r];
    RowContext ctx{notes_file, notes.line_numbers[r]};
    Note n{row[0], row[1], ctx.time(row[2], "chart_time"), row[3], row[4]};
    if (!note_ids.insert(n.note_id).second) ctx.error(ErrorKind::validation, "duplicate note_id '" + n.note_id + "'");
    patient_of(tables, n.patient_id, ctx).notes.push_back(std::move(n));
  }

  tables.row_counts = {{patients_file, patients.rows.size()}, {admissions_file, admissions.rows.size()},
                       {stays_file, stays.rows.size()},       {vent_file, vents.rows.size()},
                       {diagnoses_file, diagnoses.rows.size()}, {notes_file, notes.rows.size()}};
  return tables;
}

void write_tables(const std::filesystem::path& dir, const Tables& tables) {
  std::filesystem::create_directories(dir);
  auto header = [](const std::vector<std::string>& h) { return io::csv_line(h); };
  std::string patients = header(kPatientsHeader), admissions = header(kAdmissionsHeader), stays = header(kIcuStaysHeader),
              vents = header(kVentEventsHeader), diagnoses = header(kDiagnosesHeader), notes = header(kNotesHeader);
  char age[32];
  for (const auto& [id, p] : tables.patients) {
    std::snprintf(age, sizeof(age), "%.10g", p.age);
    std::vector<std::string> row{id, age, p.sex, p.ethnicity, p.death_time ? io::format_timestamp(*p.death_time) : ""};
    patients += io::csv_line(row);
    for (const auto& a : p.admissions) {
      std::vector<std::string> r{a.admission_id, id, io::format_timestamp(a.admit_time), io::format_timestamp(a.discharge_time),
                                 a.organ_donor ? "1" : "0", a.external_transfer ? "1" : "0"};
      admissions += io::csv_line(r);
    }
    for (const auto& s : p.icu_stays) {
      std::vector<std::string> r{s.stay_id, s.admission_id, io::format_timestamp(s.in_time), io::format_timestamp(s.out_time)};
      stays += io::csv_line(r);
    }
    for (const auto& v : p.vent_events) {
      std::vector<std::string> r{id, v.stay_id, io::format_timestamp(v.interval.start), io::format_timestamp(v.interval.end)};
      vents += io::csv_line(r);
    }
    for (const auto& tag : p.exclusion_diagnoses) {
      std::vector<std::string> r{id, tag};
      diagnoses += io::csv_line(r);
    }
    for (const auto& n : p.notes) {
      notes += io::csv_field(n.note_id) + "," + io::csv_field(id) + "," + io::format_timestamp(n.chart_time) + "," +
               io::csv_field(n.category) + "," + io::csv_field(n.text, true) + "\n";
    }
  }
  io::write_file(dir / "patients.csv", patients);
  io::write_file(dir / "admissions.csv", admissions);
  io::write_file(dir / "icustays.csv", stays);
  io::write_file(dir / "ventevents.csv", vents);
  io::write_file(dir / "diagnoses.csv", diagnoses);
  io::write_file(dir / "notes.csv", notes);
}

}  // namespace ventcast::cohort
