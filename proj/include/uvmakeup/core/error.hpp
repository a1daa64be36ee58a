#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace uvmakeup {

/// Machine-readable failure classes. The CLI and the HTTP service surface the
/// category name verbatim, so the spelling of `category_name` is part of the
/// external interface.
enum class ErrorCategory {
  invalid_argument,
  shape_mismatch,
  geometry_mismatch,
  geometry_failure,
  io,
  checkpoint,
  model_missing,
  numeric,
  empty_dataset,
  not_found,
};

constexpr std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::invalid_argument: return "invalid_argument";
    case ErrorCategory::shape_mismatch: return "shape_mismatch";
    case ErrorCategory::geometry_mismatch: return "geometry_mismatch";
    case ErrorCategory::geometry_failure: return "geometry_failure";
    case ErrorCategory::io: return "io";
    case ErrorCategory::checkpoint: return "checkpoint";
    case ErrorCategory::model_missing: return "model_missing";
    case ErrorCategory::numeric: return "numeric";
    case ErrorCategory::empty_dataset: return "empty_dataset";
    case ErrorCategory::not_found: return "not_found";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message, std::string detail = {})
      : std::runtime_error(message), category_(category), detail_(std::move(detail)) {}

  ErrorCategory category() const noexcept { return category_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCategory category_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& message,
                              std::string detail = {}) {
  throw Error(category, message, std::move(detail));
}

inline void require(bool condition, ErrorCategory category, const std::string& message) {
  if (!condition) fail(category, message);
}

}  // namespace uvmakeup
