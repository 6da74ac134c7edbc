#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gnce {

// Base of every error thrown by the library. The CLI maps the subclasses onto
// exit codes (usage 1, data 2, resource 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller violated an operation precondition (bad size, bad config value).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Input data is malformed or inconsistent (corrupt files, bad values).
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// JSON document does not follow the expected schema; carries a JSON path.
class SchemaError : public DataError {
 public:
  SchemaError(std::string path, const std::string& what)
      : DataError(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class ConfigMismatchError : public DataError {
 public:
  using DataError::DataError;
};

class ResourceError : public Error {
 public:
  using Error::Error;
};

// The sampler could not produce a query of the requested shape/size.
class SamplingExhausted : public ResourceError {
 public:
  using ResourceError::ResourceError;
};

}  // namespace gnce
