#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gir {

enum class ErrorCode {
  InvalidParam,
  DimensionMismatch,
  ImageTooSmall,
  FileNotFound,
  UnsupportedFormat,
  CorruptStream,
  IoError,
  ParseError,
  SchemaVersionMismatch,
  LengthMismatch,
  NotSymmetric,
  DegenerateMatrix,
  TaskSetMismatch,
  MissingOutput,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidParam: return "InvalidParam";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptStream: return "CorruptStream";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::DegenerateMatrix: return "DegenerateMatrix";
    case ErrorCode::TaskSetMismatch: return "TaskSetMismatch";
    case ErrorCode::MissingOutput: return "MissingOutput";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace gir
