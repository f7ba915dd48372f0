#pragma once

#include <stdexcept>
#include <string>

namespace hlogit {

enum class errc {
  missing_column,
  unresolved_road_id,
  invalid_binary_value,
  non_positive_aadt,
  unknown_term,
  empty_dataset,
  degenerate_split,
  separation_detected,
  singular_information,
  dimension_mismatch,
  insufficient_groups,
  negative_variance,
  unsupported_order,
  invalid_config,
  not_converged,
  length_mismatch,
  empty_input,
  one_class_only,
  empty_comparison,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::missing_column: return "MissingColumn";
    case errc::unresolved_road_id: return "UnresolvedRoadId";
    case errc::invalid_binary_value: return "InvalidBinaryValue";
    case errc::non_positive_aadt: return "NonPositiveAadt";
    case errc::unknown_term: return "UnknownTerm";
    case errc::empty_dataset: return "EmptyDataset";
    case errc::degenerate_split: return "DegenerateSplit";
    case errc::separation_detected: return "SeparationDetected";
    case errc::singular_information: return "SingularInformation";
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::insufficient_groups: return "InsufficientGroups";
    case errc::negative_variance: return "NegativeVariance";
    case errc::unsupported_order: return "UnsupportedOrder";
    case errc::invalid_config: return "InvalidConfig";
    case errc::not_converged: return "NotConverged";
    case errc::length_mismatch: return "LengthMismatch";
    case errc::empty_input: return "EmptyInput";
    case errc::one_class_only: return "OneClassOnly";
    case errc::empty_comparison: return "EmptyComparison";
  }
  return "Unknown";
}

/// Library error: carries a machine-checkable code plus a human message.
class error : public std::runtime_error {
 public:
  error(errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& msg) { throw error(code, msg); }

}  // namespace hlogit
