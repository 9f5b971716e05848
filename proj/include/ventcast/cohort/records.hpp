#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ventcast/io/time.hpp"

namespace ventcast::cohort {

using io::Timestamp;

struct Note {
  std::string note_id;
  std::string patient_id;
  Timestamp chart_time;
  std::string category;
  std::string text;
};

struct Interval {
  Timestamp start;
  Timestamp end;
};

struct Admission {
  std::string admission_id;
  Timestamp admit_time;
  Timestamp discharge_time;
  bool organ_donor = false;
  bool external_transfer = false;
};

struct IcuStay {
  std::string stay_id;
  std::string admission_id;
  Timestamp in_time;
  Timestamp out_time;
};

struct VentEvent {
  std::string stay_id;
  Interval interval;
};

struct PatientRecord {
  std::string patient_id;
  double age = 0.0;
  std::string sex;
  std::string ethnicity;
  std::optional<Timestamp> death_time;
  std::vector<Admission> admissions;
  std::vector<IcuStay> icu_stays;
  std::vector<VentEvent> vent_events;
  std::set<std::string> exclusion_diagnoses;
  std::vector<Note> notes;
};

// Loaded tables keyed by patient id (sorted, so iteration is deterministic).
struct Tables {
  std::map<std::string, PatientRecord> patients;
  std::map<std::string, std::size_t> row_counts;  // file name -> data rows
};

struct CohortExample {
  std::string patient_id;
  double age = 0.0;
  std::string sex;
  std::string ethnicity;
  std::vector<Note> notes;  // in-window, ascending (chart_time, note_id)
  bool pmv = false;
  bool mortality = false;
  std::string first_stay_id;
  Timestamp vent_start;
};

enum class Task { pmv, mortality };
std::string to_string(Task task);
Task parse_task(const std::string& name);
inline bool label_for(const CohortExample& example, Task task) {
  return task == Task::pmv ? example.pmv : example.mortality;
}

}  // namespace ventcast::cohort
