#pragma once

#include <stdexcept>
#include <string>

namespace plateau {

/// Raised when an operation's input violates a mathematical precondition
/// (infeasible charges, singular field, projection center on the set, ...).
class DomainError : public std::runtime_error {
 public:
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised for malformed configuration: unparsable files, out-of-range
/// parameters, missing inputs.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace plateau
