#pragma once

#include <stdexcept>
#include <string>

namespace mmssl {

enum class ErrorCode {
  ZeroVector,
  DimensionMismatch,
  IndexOutOfRange,
  InvalidConfig,
  SameIndex,
  NumericalOverflow,
  InvalidDims,
  TraceMismatch,
  ShapeMismatch,
  InsufficientPatients,
  InvalidK,
  IoError,
  FormatError,
  EmptyTrainSet,
  KTooLarge,
  SingleClass,
  LengthMismatch,
  DegenerateCovariance,
  InsufficientSamples,
  DegenerateTest,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mmssl
