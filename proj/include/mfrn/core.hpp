#pragma once

#include <array>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mfrn/error.hpp"

namespace mfrn {

enum class ActivationKind { Identity, ReLU, Sigmoid, Tanh, GCU };

/// Activation function sigma together with its derivative.
///
/// Sigmoid and Tanh are bounded by 1. Identity, ReLU and GCU are not; the
/// well-posedness theory then needs compactly supported initial data.
class Activation {
 public:
  constexpr explicit Activation(ActivationKind kind = ActivationKind::Identity) : kind_(kind) {}

  static Activation from_name(std::string_view name);

  ActivationKind kind() const { return kind_; }
  std::string_view name() const;
  bool bounded() const;

  double value(double x) const;
  /// ReLU uses derivative 0 at the kink.
  double derivative(double x) const;

  bool operator==(const Activation&) const = default;

 private:
  ActivationKind kind_;
};

double activation_eval(const Activation& a, double x);

/// Uniform time grid t_k = k * dt, k = 0..n_steps.
class TimeGrid {
 public:
  TimeGrid(double t_final, int n_steps);

  /// Builds the grid from a step size; T / dt must be an integer up to rounding.
  static TimeGrid from_step(double t_final, double dt);

  double t_final() const { return t_final_; }
  double dt() const { return dt_; }
  int n_steps() const { return n_steps_; }
  std::size_t n_nodes() const { return static_cast<std::size_t>(n_steps_) + 1; }
  double node(int k) const { return k * dt_; }

  bool operator==(const TimeGrid&) const = default;

 private:
  double t_final_;
  double dt_;
  int n_steps_;
};

/// Controls (w, b) sampled on a time grid, linearly interpolated between nodes.
class ControlPath {
 public:
  ControlPath(TimeGrid grid, std::vector<double> w, std::vector<double> b);

  static ControlPath zero(const TimeGrid& grid);
  static ControlPath sample(const TimeGrid& grid, const std::function<double(double)>& w,
                            const std::function<double(double)>& b);

  const TimeGrid& grid() const { return grid_; }
  const std::vector<double>& w() const { return w_; }
  const std::vector<double>& b() const { return b_; }

  /// (w(t), b(t)); exact at nodes. Throws DomainError outside [0, T].
  std::pair<double, double> operator()(double t) const;
  std::pair<double, double> at_node(int k) const {
    return {w_[static_cast<std::size_t>(k)], b_[static_cast<std::size_t>(k)]};
  }

  /// Member of the admissible set: w(0) = b(0) = 0.
  bool admissible() const { return w_.front() == 0.0 && b_.front() == 0.0; }

  /// Largest finite-difference slope of w plus that of b (the Lipschitz budget L_w + L_b).
  double lipschitz() const;

  /// max over nodes of max(|w|, |b|).
  double sup_norm() const;

  bool operator==(const ControlPath&) const = default;

 private:
  TimeGrid grid_;
  std::vector<double> w_;
  std::vector<double> b_;
};

std::pair<double, double> control_eval(const ControlPath& c, double t);

/// Optimisation and discretisation parameters of a run.
struct RunConfig {
  double gamma_w = 1e-3;
  double gamma_b = 1e-3;
  double tol = 1e-4;
  int max_armijo = 10;
  double cfl = 0.45;
  std::array<double, 2> domain{-2.0, 3.0};
  int n_cells = 200;
  int dimension = 1;
  /// Outer Gauss-Seidel iteration cap.
  int max_iterations = 500;
  /// SSP-RK3 steps per control interval; 0 picks the fewest that satisfy the CFL bound.
  int substeps = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  bool operator==(const RunConfig&) const = default;
};

}  // namespace mfrn
