#pragma once

#include <stdexcept>
#include <string>

namespace dtwarn {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input text (bad JSON, truncated payload, ...).
struct ParseError : Error {
  using Error::Error;
};

/// Structurally valid input violating a documented invariant. `field` names
/// the offending field.
struct ValidationError : Error {
  std::string field;
  ValidationError(std::string field_name, const std::string& message)
      : Error("invalid field '" + field_name + "': " + message), field(std::move(field_name)) {}
};

/// Missing or unusable configuration. `field` names the config entry.
struct ConfigError : Error {
  std::string field;
  ConfigError(std::string field_name, const std::string& message)
      : Error("config '" + field_name + "': " + message), field(std::move(field_name)) {}
};

}  // namespace dtwarn
