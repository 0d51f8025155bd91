#pragma once

#include <stdexcept>
#include <string>

namespace vsplit {

/// Base of every error raised by the library. The CLI maps the subclasses
/// onto exit codes, so new error kinds should derive from one of the two
/// families below rather than from this class directly.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: configuration, files on disk, partition specs.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public ConfigError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : ConfigError(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

class SchemaError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Failures detected while running: shape mismatches, protocol misuse, crypto.
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

class DimensionError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class DomainError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class ContractError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class NumericError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class ResourceError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class ProtocolError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class RoleError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class CryptoError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class RangeError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class InputError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class IoError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

}  // namespace vsplit
