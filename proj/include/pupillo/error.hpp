#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pupillo {

enum class ErrorCode {
  DegenerateInput,
  EmptyMask,
  RejectedBySolidity,
  RejectedByAspect,
  NonSquareInput,
  OutOfRange,
  InvariantViolation,
  SingularTransform,
  DimensionMismatch,
  UnsupportedOp,
  UnknownLabel,
  MissingRegion,
  TooFewSamples,
  GeometryViolation,
  ConfigError,
  ShapeMismatch,
  DivergenceDetected,
  NonMonotoneTime,
  NoBaseline,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the toolkit. `value()` carries the offending
/// quantity where one exists (the solidity that failed the filter, the epoch
/// that diverged, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<double> value = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<double> value() const noexcept { return value_; }

 private:
  ErrorCode code_;
  std::optional<double> value_;
};

}  // namespace pupillo
