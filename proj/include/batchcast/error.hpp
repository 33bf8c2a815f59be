#pragma once

#include <stdexcept>
#include <string>

namespace batchcast {

/// Error categories. The numeric values double as the CLI exit codes.
enum class ErrorKind : int {
  Config = 2,
  Data = 3,
  Numerical = 4,
  Compatibility = 5,
};

/// Base exception for every failure raised by the library.
///
/// `code()` names the specific condition (e.g. "NotPositiveDefinite"), `kind()`
/// groups it for exit-code purposes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& code() const noexcept { return code_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
  std::string code_;
};

inline Error config_error(std::string code, const std::string& msg) {
  return Error(ErrorKind::Config, std::move(code), msg);
}
inline Error data_error(std::string code, const std::string& msg) {
  return Error(ErrorKind::Data, std::move(code), msg);
}
inline Error numerical_error(std::string code, const std::string& msg) {
  return Error(ErrorKind::Numerical, std::move(code), msg);
}
inline Error compat_error(std::string code, const std::string& msg) {
  return Error(ErrorKind::Compatibility, std::move(code), msg);
}

}  // namespace batchcast
