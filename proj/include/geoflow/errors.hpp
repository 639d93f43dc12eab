#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace geoflow {

/// Base class of every exception thrown by geoflow.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument does not hold (angles, grid size, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Curvature is no longer strictly negative.
class ConcavityError : public Error {
 public:
  ConcavityError(const std::string& what, double theta,
                 double t = std::numeric_limits<double>::quiet_NaN())
      : Error(what), theta_(theta), t_(t) {}

  /// Tangent angle of the offending node.
  double theta() const noexcept { return theta_; }
  /// Time at which it happened (NaN when not produced by a solver).
  double time() const noexcept { return t_; }

 private:
  double theta_;
  double t_;
};

/// A solver produced a non-finite value.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double t) : Error(what), t_(t) {}
  double time() const noexcept { return t_; }

 private:
  double t_;
};

/// Invalid experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace geoflow
