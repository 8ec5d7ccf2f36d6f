#pragma once

#include <stdexcept>
#include <string>

namespace modlab {

// Categories double as CLI exit codes and C API status codes.
enum class ErrorCategory : int {
  internal = 1,
  usage = 2,
  data = 3,
  numeric = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail_usage(const std::string& message) {
  throw Error(ErrorCategory::usage, message);
}
[[noreturn]] inline void fail_data(const std::string& message) {
  throw Error(ErrorCategory::data, message);
}
[[noreturn]] inline void fail_numeric(const std::string& message) {
  throw Error(ErrorCategory::numeric, message);
}

}  // namespace modlab
