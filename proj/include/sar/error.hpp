#pragma once

#include <stdexcept>
#include <string>

namespace sar {

enum class ErrorKind {
  Bounds,
  Size,
  Shape,
  Config,
  State,
  Value,
  Parse,
  Format,
  Protocol,
  Timeout,
  Transport,
  InsufficientData,
  Gone,
  NotFound,
  Limit,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Bounds: return "bounds";
    case ErrorKind::Size: return "size";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Config: return "config";
    case ErrorKind::State: return "state";
    case ErrorKind::Value: return "value";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Format: return "format";
    case ErrorKind::Protocol: return "protocol";
    case ErrorKind::Timeout: return "timeout";
    case ErrorKind::Transport: return "transport";
    case ErrorKind::InsufficientData: return "insufficient_data";
    case ErrorKind::Gone: return "gone";
    case ErrorKind::NotFound: return "not_found";
    case ErrorKind::Limit: return "limit";
  }
  return "unknown";
}

/// Every failure raised by the library carries a kind so callers (and the
/// HTTP layer) can map it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), message_(what) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
  /// The text without the kind prefix.
  [[nodiscard]] const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

}  // namespace sar
