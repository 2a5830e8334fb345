#ifndef PERCEPT_ERROR_HPP
#define PERCEPT_ERROR_HPP

#include <stdexcept>
#include <string>

namespace percept {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied something outside an operation's domain (empty text,
/// out-of-range position, bad label set, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A model service could not be reached or timed out. Retryable.
class OracleUnavailable : public Error {
 public:
  using Error::Error;
};

/// A model service answered with something that violates the wire schema.
/// Not retryable.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Configuration failed validation. `field()` names the offending key path.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Filesystem failure (unreadable input, unwritable output).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace percept

#endif  // PERCEPT_ERROR_HPP
