#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eddynet {

enum class ErrorCategory {
  io,
  bad_magic,
  version,
  truncated,
  shape,
  variant,
  non_finite,
  invalid_argument,
};

std::string_view category_name(ErrorCategory c);

/// Every library failure is reported as an Error carrying a category that
/// the CLI prints as a machine-parsable token.
class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

inline std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::io: return "io";
    case ErrorCategory::bad_magic: return "bad_magic";
    case ErrorCategory::version: return "version";
    case ErrorCategory::truncated: return "truncated";
    case ErrorCategory::shape: return "shape";
    case ErrorCategory::variant: return "variant";
    case ErrorCategory::non_finite: return "non_finite";
    case ErrorCategory::invalid_argument: return "invalid_argument";
  }
  return "unknown";
}

}  // namespace eddynet
