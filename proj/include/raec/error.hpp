#pragma once

#include <stdexcept>
#include <string>

namespace raec {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violated a documented schema or contract. CLI exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Taxonomy document failed validation; `offending_id()` names the culprit.
class TaxonomyError : public ValidationError {
 public:
  TaxonomyError(std::string message, std::string offending_id)
      : ValidationError(std::move(message)), offending_id_(std::move(offending_id)) {}

  const std::string& offending_id() const noexcept { return offending_id_; }

 private:
  std::string offending_id_;
};

/// File or stream could not be read or written. CLI exit code 2.
class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class SamplingError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class StatsError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class EmbeddingError : public Error {
 public:
  using Error::Error;
};

class RetrievalError : public Error {
 public:
  using Error::Error;
};

/// Transport-level failure talking to a model or embedding service.
class BackendError : public Error {
 public:
  enum class Kind { kUnavailable, kTimeout, kProtocol };

  BackendError(Kind kind, std::string message) : Error(std::move(message)), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Model output could not be parsed into the structured schema after the retry.
class StructuredOutputError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Request document violated its schema; `field()` names the offending field.
class SchemaError : public ValidationError {
 public:
  SchemaError(std::string message, std::string field)
      : ValidationError(std::move(message)), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Model output named error codes absent from the active taxonomy after the retry.
class CodeValidationError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace raec
