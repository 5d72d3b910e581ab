#include "mmssl/error.hpp"

namespace mmssl {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::SameIndex: return "SameIndex";
    case ErrorCode::NumericalOverflow: return "NumericalOverflow";
    case ErrorCode::InvalidDims: return "InvalidDims";
    case ErrorCode::TraceMismatch: return "TraceMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InsufficientPatients: return "InsufficientPatients";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::EmptyTrainSet: return "EmptyTrainSet";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateCovariance: return "DegenerateCovariance";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::DegenerateTest: return "DegenerateTest";
  }
  return "Unknown";
}

}  // namespace mmssl
