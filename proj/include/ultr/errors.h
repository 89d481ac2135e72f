#ifndef ULTR_ERRORS_H_
#define ULTR_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ultr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters or an unusable combination of inputs.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data violates a documented invariant.
class DataError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of a function.
class DomainError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class EstimationError : public DataError {
 public:
  using DataError::DataError;
};

class ExperimentError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace ultr

#endif  // ULTR_ERRORS_H_
