#pragma once

#include <filesystem>
#include <vector>

#include "ventcast/cohort/records.hpp"

namespace ventcast::cohort {

inline const std::vector<std::string> kPatientsHeader{"patient_id", "age", "sex", "ethnicity", "death_time"};
inline const std::vector<std::string> kAdmissionsHeader{"admission_id", "patient_id", "admit_time", "discharge_time",
                                                         "organ_donor", "external_transfer"};
inline const std::vector<std::string> kIcuStaysHeader{"stay_id", "admission_id", "in_time", "out_time"};
inline const std::vector<std::string> kVentEventsHeader{"patient_id", "stay_id", "start_time", "end_time"};
inline const std::vector<std::string> kDiagnosesHeader{"patient_id", "exclusion_tag"};
inline const std::vector<std::string> kNotesHeader{"note_id", "patient_id", "chart_time", "category", "text"};

// Reads patients.csv, admissions.csv, icustays.csv, ventevents.csv,
// diagnoses.csv and notes.csv from `dir`. Errors name the file and line.
Tables load_tables(const std::filesystem::path& dir);

// Writes the same six files (used by the generator and by tests).
void write_tables(const std::filesystem::path& dir, const Tables& tables);

}  // namespace ventcast::cohort
