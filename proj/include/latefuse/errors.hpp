#pragma once

#include <stdexcept>
#include <string>

namespace latefuse {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Precondition violations on operation inputs (shape mismatch, non-finite
// values, out-of-range parameters).
struct InvalidInput : Error {
  using Error::Error;
};

// Malformed file content; line is 1-based, 0 when not line-addressable.
struct ParseError : Error {
  ParseError(const std::string& msg, int line_number)
      : Error(line_number > 0 ? msg + " (line " + std::to_string(line_number) + ")" : msg),
        line(line_number) {}
  int line;
};

// Well-formed file whose values violate a schema contract.
struct ValidationError : Error {
  using Error::Error;
};

// Unknown or ill-typed configuration key.
struct ConfigError : Error {
  ConfigError(const std::string& msg, std::string key_name)
      : Error(msg), key(std::move(key_name)) {}
  std::string key;
};

struct IoError : Error {
  IoError(const std::string& msg, std::string file_path)
      : Error(msg + ": " + file_path), path(std::move(file_path)) {}
  std::string path;
};

// Operation called on a dataset mode it is not defined for
// (e.g. Bayes oracle on soft-mode data).
struct UnsupportedMode : Error {
  using Error::Error;
};

}  // namespace latefuse
