#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dpglm {

// Base of every error raised by the library. Callers that only care about
// "something went wrong in dpglm" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration or input validation failures (CLI exit code 1).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public ValidationError {
 public:
  ConfigError(const std::string& field, const std::string& reason)
      : ValidationError("config field '" + field + "': " + reason), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class ZeroVariance : public ValidationError {
 public:
  explicit ZeroVariance(const std::string& column)
      : ValidationError("column '" + column + "' has zero variance"), column_(column) {}
  const std::string& column() const { return column_; }

 private:
  std::string column_;
};

class DimensionMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class OutOfSupport : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class SchemaMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ParseError : public ValidationError {
 public:
  ParseError(std::size_t row, const std::string& column, const std::string& reason)
      : ValidationError("parse error at row " + std::to_string(row) + ", column '" + column +
                        "': " + reason),
        row_(row),
        column_(column) {}
  std::size_t row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

class UnknownLevel : public ValidationError {
 public:
  UnknownLevel(const std::string& value, const std::string& column)
      : ValidationError("unknown level '" + value + "' in column '" + column + "'"),
        value_(value),
        column_(column) {}
  const std::string& value() const { return value_; }
  const std::string& column() const { return column_; }

 private:
  std::string value_;
  std::string column_;
};

class InsufficientData : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class LengthMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class EmptyInput : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class TooLarge : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Runtime failures (CLI exit code 2).
class NonConjugateBase : public Error {
 public:
  using Error::Error;
};

class DegenerateWeights : public Error {
 public:
  using Error::Error;
};

class SeparationDetected : public Error {
 public:
  using Error::Error;
};

class NetworkUnavailable : public Error {
 public:
  using Error::Error;
};

class ChecksumMismatch : public Error {
 public:
  using Error::Error;
};

class RowCountMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace dpglm
