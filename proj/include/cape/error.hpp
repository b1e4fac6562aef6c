#pragma once

#include <stdexcept>
#include <string>

namespace cape {

// Base of every error raised by the library. `code()` is a stable,
// machine-parsable token used by the CLI error line.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& message) : Error("schema", message) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& message)
      : Error("invalid_argument", message) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& message)
      : Error("numerical", message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io", message) {}
};

}  // namespace cape
