#pragma once

#include <stdexcept>
#include <string>

namespace kinreg {

/// Error categories shared by the C++ core and the C API status codes.
enum class ErrorCode {
  InvalidArgument = 1,
  Domain = 2,         // input outside an operation's domain (non-finite, exterior point, ...)
  Singularity = 3,    // kernel evaluated on its diagonal
  NoTrajectory = 4,   // zero velocity
  Config = 5,
  Io = 6,
  Internal = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorCode::Domain, what) {}
};

class SingularityError : public Error {
 public:
  explicit SingularityError(const std::string& what) : Error(ErrorCode::Singularity, what) {}
};

class NoTrajectoryError : public Error {
 public:
  explicit NoTrajectoryError(const std::string& what) : Error(ErrorCode::NoTrajectory, what) {}
};

class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(ErrorCode::Config, "config key '" + key + "': " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Non-fatal diagnostics (e.g. velocity truncation too tight). Default sink is stderr.
void warn(const std::string& message);
void set_warning_sink(void (*sink)(const char* message, void* user), void* user);

}  // namespace kinreg
