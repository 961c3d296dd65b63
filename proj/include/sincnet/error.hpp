#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sincnet {

enum class ErrorKind {
  InvalidParameter,
  InvalidSpec,
  Shape,
  InvalidBatch,
  InvalidLabel,
  InvalidInput,
  Format,
  Io,
  Config,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidParameter: return "invalid-parameter";
    case ErrorKind::InvalidSpec: return "invalid-spec";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::InvalidBatch: return "invalid-batch";
    case ErrorKind::InvalidLabel: return "invalid-label";
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::Format: return "format";
    case ErrorKind::Io: return "io";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

/// Every failure raised by the library. `kind()` is the machine-readable
/// category the CLI prints as its reason prefix.
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

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) throw Error(kind, message);
}

}  // namespace sincnet
