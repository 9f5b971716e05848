#include "ventcast/cohort/records.hpp"

#include "ventcast/error.hpp"

namespace ventcast::cohort {

std::string to_string(Task task) { return task == Task::pmv ? "pmv" : "mortality"; }

Task parse_task(const std::string& name) {
  if (name == "pmv") return Task::pmv;
  if (name == "mortality") return Task::mortality;
  fail(ErrorKind::config, "unknown task '" + name + "' (expected pmv or mortality)");
}

}  // namespace ventcast::cohort
