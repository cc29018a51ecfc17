#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace scnn {

enum class ErrorCategory {
  shape,       // tensor / image / vector dimensions disagree
  numeric,     // non-finite values or degenerate numerics
  format,      // malformed file contents (magic, version, truncation, CSV)
  io,          // file could not be opened / written
  config,      // invalid configuration key or value
  data,        // dataset cannot satisfy the request
  state,       // operation called in the wrong order
  range,       // argument outside its allowed domain
};

inline std::string_view to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::shape: return "shape";
    case ErrorCategory::numeric: return "numeric";
    case ErrorCategory::format: return "format";
    case ErrorCategory::io: return "io";
    case ErrorCategory::config: return "config";
    case ErrorCategory::data: return "data";
    case ErrorCategory::state: return "state";
    case ErrorCategory::range: return "range";
  }
  return "unknown";
}

/// Structured error carrying a machine-readable category and the module that raised it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, std::string module, const std::string& message)
      : std::runtime_error(module + ": " + message),
        category_(category),
        module_(std::move(module)),
        message_(message) {}

  ErrorCategory category() const noexcept { return category_; }
  const std::string& module() const noexcept { return module_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCategory category_;
  std::string module_;
  std::string message_;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream oss;
  (oss << ... << std::forward<Args>(args));
  return oss.str();
}

template <typename... Args>
[[noreturn]] void fail(ErrorCategory c, std::string module, Args&&... args) {
  throw Error(c, std::move(module), concat(std::forward<Args>(args)...));
}

}  // namespace detail
}  // namespace scnn
