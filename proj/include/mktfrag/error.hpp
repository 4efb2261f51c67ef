#pragma once

#include <stdexcept>
#include <string>

namespace mktfrag {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A value violates a documented invariant (theta outside [0,1], r <= 0, ...).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(what) {}
};

/// A market received no bids or no asks, so no clearing price exists.
class EmptySideError : public Error {
 public:
  explicit EmptySideError(const std::string& what) : Error(what) {}
};

/// An iterative method stopped without meeting its tolerance.
class ConvergenceError : public Error {
 public:
  explicit ConvergenceError(const std::string& what) : Error(what) {}
};

class SingularCovarianceError : public Error {
 public:
  explicit SingularCovarianceError(const std::string& what) : Error(what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what) {}
};

}  // namespace mktfrag
