#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ventcast {

enum class ErrorKind {
  dimension,
  contract,
  io,
  parse,
  validation,
  undefined_metric,
  leakage,
  config,
  internal,
};

std::string_view to_string(ErrorKind kind);

// All library failures surface as this exception; `kind` lets the CLI map
// failures onto exit codes and machine-parseable error lines.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace ventcast
