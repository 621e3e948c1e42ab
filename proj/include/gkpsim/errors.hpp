#ifndef GKPSIM_ERRORS_HPP
#define GKPSIM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace gkpsim {

enum class ErrorKind {
  invalid_config,
  truncation,
  invalid_generator,
  dimension_mismatch,
  undefined_squeezing,
  invalid_epsilon,
  invalid_mu,
  must_project,
  invalid_table,
  fit_failed
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_config: return "invalid-config";
    case ErrorKind::truncation: return "truncation-error";
    case ErrorKind::invalid_generator: return "invalid-generator";
    case ErrorKind::dimension_mismatch: return "dimension-mismatch";
    case ErrorKind::undefined_squeezing: return "undefined-squeezing";
    case ErrorKind::invalid_epsilon: return "invalid-epsilon";
    case ErrorKind::invalid_mu: return "invalid-mu";
    case ErrorKind::must_project: return "must-project";
    case ErrorKind::invalid_table: return "invalid-table";
    case ErrorKind::fit_failed: return "fit-failed";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Carries the measured buffer population. op_index / trajectory are -1 when unknown.
class TruncationError : public Error {
 public:
  TruncationError(int mode, double population, const std::string& what)
      : Error(ErrorKind::truncation, what), mode(mode), population(population) {}
  int mode;
  double population;
  int op_index = -1;
  long trajectory = -1;
};

}  // namespace gkpsim

#endif
