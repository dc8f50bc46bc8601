#pragma once

#include <stdexcept>
#include <string>

namespace cgnn {

// Root of every exception thrown by the library. The CLI maps the
// subclasses onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Non-finite simulator state or training loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// run_to_stability hit its step bound.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double max_velocity, double max_force)
      : Error(what), max_velocity_(max_velocity), max_force_(max_force) {}

  double max_velocity() const { return max_velocity_; }
  double max_force() const { return max_force_; }

 private:
  double max_velocity_;
  double max_force_;
};

}  // namespace cgnn
