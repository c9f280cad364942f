#pragma once

#include <stdexcept>
#include <string>

namespace mttf {

// Every error raised by the library derives from Error and carries the name
// of the module that raised it, so CLI diagnostics can say where a failure
// originated.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(module + ": " + what), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

class AdapterError : public Error {
 public:
  AdapterError(std::string module, const std::string& what, std::string diagnostics = {})
      : Error(std::move(module), diagnostics.empty() ? what : what + "\n" + diagnostics),
        diagnostics_(std::move(diagnostics)) {}

  const std::string& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::string diagnostics_;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

enum class FormatErrorKind {
  kTruncated,
  kBadMagic,
  kBadCrc,
  kUnsupportedVersion,
  kLengthMismatch,
  kInvalidField,
};

const char* to_string(FormatErrorKind kind);

class FormatError : public Error {
 public:
  FormatError(FormatErrorKind kind, const std::string& what)
      : Error("bitstream", std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  FormatErrorKind kind() const noexcept { return kind_; }

 private:
  FormatErrorKind kind_;
};

}  // namespace mttf
