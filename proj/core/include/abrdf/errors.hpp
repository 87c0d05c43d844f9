#pragma once

#include <stdexcept>
#include <string>

namespace abrdf {

/// Bad shapes, inconsistent layouts, invalid configuration values.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Misuse of an API contract (e.g. reusing a consumed gradient tape).
class UsageError : public std::logic_error {
 public:
  explicit UsageError(const std::string& what) : std::logic_error(what) {}
};

/// Non-finite values, rejected optimizer steps, diverged computations.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Missing files, malformed datasets, broken checkpoints.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Out-of-range arguments to geometric operations.
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

}  // namespace abrdf
