#pragma once

#include <stdexcept>
#include <string>

namespace inferline {

// Invalid input: malformed files, bad parameters, unknown ids. CLI exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

class CatalogError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ProfileError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class TraceError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace inferline
