#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bootband {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Distribution or model parameter outside its domain.
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Operation called on a state it cannot handle (e.g. resampling an empty multiset).
class InvalidState : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class RankDeficiency : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class OptimizationFailure : public Error {
 public:
  OptimizationFailure(const std::string& what, long steps)
      : Error(what + " after " + std::to_string(steps) + " steps"), steps_(steps) {}
  long steps() const { return steps_; }

 private:
  long steps_;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace bootband
