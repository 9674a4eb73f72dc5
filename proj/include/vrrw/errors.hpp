#pragma once

#include <stdexcept>
#include <string>

namespace vrrw {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A table or grid would have to grow past its configured cap.
class ResourceError : public std::runtime_error {
 public:
  ResourceError(const std::string& what, double attained)
      : std::runtime_error(what), attained_(attained) {}

  /// Largest argument (or partial value) reached before giving up.
  double attained() const noexcept { return attained_; }

 private:
  double attained_;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vrrw
