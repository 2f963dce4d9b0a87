#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace syncml {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// A least-squares system without enough independent points.
class RankError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

// An iterate scored below the reference optimum by more than numeric noise.
class OracleError : public Error {
 public:
  using Error::Error;
};

}  // namespace syncml
