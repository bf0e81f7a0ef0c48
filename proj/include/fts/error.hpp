#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fts {

enum class ErrorCode {
  missing_column,
  malformed_row,
  non_finite_score,
  duplicate_candidate_id,
  empty_cohort,
  invalid_spec,
  invalid_config,
  invalid_weights,
  domain_error,
  single_class_dataset,
  missing_id,
  unknown_attribute,
  cohort_mismatch,
  io_error,
  unknown_session,
  unknown_cohort,
  conflict,
  port_in_use,
  bad_request,
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::missing_column: return "MissingColumn";
    case ErrorCode::malformed_row: return "MalformedRow";
    case ErrorCode::non_finite_score: return "NonFiniteScore";
    case ErrorCode::duplicate_candidate_id: return "DuplicateCandidateId";
    case ErrorCode::empty_cohort: return "EmptyCohort";
    case ErrorCode::invalid_spec: return "InvalidSpec";
    case ErrorCode::invalid_config: return "InvalidConfig";
    case ErrorCode::invalid_weights: return "InvalidWeights";
    case ErrorCode::domain_error: return "DomainError";
    case ErrorCode::single_class_dataset: return "SingleClassDataset";
    case ErrorCode::missing_id: return "MissingId";
    case ErrorCode::unknown_attribute: return "UnknownAttribute";
    case ErrorCode::cohort_mismatch: return "CohortMismatch";
    case ErrorCode::io_error: return "IoError";
    case ErrorCode::unknown_session: return "UnknownSession";
    case ErrorCode::unknown_cohort: return "UnknownCohort";
    case ErrorCode::conflict: return "Conflict";
    case ErrorCode::port_in_use: return "PortInUse";
    case ErrorCode::bad_request: return "BadRequest";
  }
  return "Unknown";
}

// Every failure raised by the library. `subject` names the offending item
// (a column, candidate id, test name, session id) when there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string subject = {})
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        detail_(std::move(message)),
        subject_(std::move(subject)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }
  const std::string& subject() const noexcept { return subject_; }

  // Stage context is prepended by the engine when an error crosses a
  // pipeline boundary.
  Error with_context(std::string_view stage) const {
    Error e(code_, std::string(stage) + ": " + detail_, subject_);
    return e;
  }

 private:
  ErrorCode code_;
  std::string detail_;
  std::string subject_;
};

}  // namespace fts
