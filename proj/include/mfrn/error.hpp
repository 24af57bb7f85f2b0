#pragma once

#include <stdexcept>
#include <string>

namespace mfrn {

/// Base class of every error raised by the solver suite.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain of an operation (e.g. control evaluated past T).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Time step exceeds the CFL bound of the finite-volume scheme.
class CflError : public Error {
 public:
  CflError(double max_speed, double dt, double dx, double cfl);

  double max_speed() const { return max_speed_; }

 private:
  double max_speed_;
};

/// Closed-form equation has no root on the admissible branch.
class NoRootError : public Error {
 public:
  using Error::Error;
};

/// Requested control target lies outside what the activation can reach.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Iteration produced a non-finite cost or state.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration file; carries the 1-based source line (0 if unknown).
class ConfigError : public Error {
 public:
  ConfigError(int line, const std::string& message, std::string field = {});

  int line() const { return line_; }
  /// Config key the error refers to, if any.
  const std::string& field() const { return field_; }
  /// Message without the line prefix.
  const std::string& detail() const { return detail_; }

 private:
  int line_;
  std::string field_;
  std::string detail_;
};

}  // namespace mfrn
