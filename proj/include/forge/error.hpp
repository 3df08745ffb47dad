#pragma once

#include <stdexcept>
#include <string>

namespace forge {

/// Root of every error the library throws.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// design_ir
class SchemaError : public Error {
public:
  using Error::Error;
};

/// Invariant violation; `path()` is a JSON-pointer-ish location such as
/// "module_irs/Adder/ports/2/width".
class ValidationError : public Error {
public:
  ValidationError(std::string path, const std::string& message)
      : Error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

private:
  std::string path_;
};

class CycleError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class MultiRootError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class EmptyDesignError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

// llm_backend
class BackendError : public Error {
public:
  using Error::Error;
};

class BackendUnavailableError : public BackendError {
public:
  using BackendError::BackendError;
};

class ScriptExhaustedError : public BackendError {
public:
  using BackendError::BackendError;
};

/// Backend reply could not be turned into the expected structure.
class ExtractionError : public Error {
public:
  using Error::Error;
};

// standardization
class EdgeValidationError : public Error {
public:
  using Error::Error;
};

// generator
class PartitionError : public Error {
public:
  using Error::Error;
};

// verification
class ToolchainNotFoundError : public Error {
public:
  using Error::Error;
};

class ValidationAbortError : public Error {
public:
  ValidationAbortError(std::string module, const std::string& message)
      : Error(message), module_(std::move(module)) {}
  const std::string& module() const noexcept { return module_; }

private:
  std::string module_;
};

// debugger
class NoMismatchDataError : public Error {
public:
  using Error::Error;
};

// evaluation
class DomainError : public Error {
public:
  using Error::Error;
};

class EmptySetError : public Error {
public:
  using Error::Error;
};

// cli / pipeline
class ConfigError : public Error {
public:
  using Error::Error;
};

class CorruptArtifactError : public Error {
public:
  using Error::Error;
};

}  // namespace forge
