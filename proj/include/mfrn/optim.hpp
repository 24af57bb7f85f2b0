#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "mfrn/core.hpp"
#include "mfrn/fvm.hpp"
#include "mfrn/measures.hpp"

namespace mfrn {

/// Target distribution g. For the quadratic loss only its first two moments enter the cost.
struct TargetMeasure {
  std::optional<DensityField> density;
  std::optional<EmpiricalMeasure> samples;
  double mean = 0.0;
  double second_moment = 0.0;

  static TargetMeasure from_density(DensityField g);
  static TargetMeasure from_samples(EmpiricalMeasure g);
  static TargetMeasure point_mass(double y);

  double variance() const { return second_moment - mean * mean; }
};

/// Gradient of the reduced cost per time node.
struct ControlGradient {
  std::vector<double> w;
  std::vector<double> b;

  double max_abs_w() const;
  double max_abs_b() const;
};

/// Iterate history of the block Gauss-Seidel loop. cost_history[0] and the gradient maxima at
/// index 0 belong to the initial guess; entry k >= 1 belongs to iterate k.
struct OptimState {
  ControlPath controls;
  std::vector<double> cost_history;
  std::vector<double> rel_error_history;  ///< e^(k), k >= 1
  std::vector<double> rho_history;        ///< accepted step of iteration k, k >= 1
  std::vector<double> max_grad_w;
  std::vector<double> max_grad_b;
  int iteration = 0;
  bool converged = false;
  /// The last line search found no cheaper candidate, so the iterate did not move (e = 0).
  bool stalled = false;
  std::vector<std::string> warnings;
};

namespace optim {

/// Integral of |x - y|^2 dg(y) = x^2 - 2 m_g x + E_g[y^2].
double tilde_loss(double x, const TargetMeasure& g);

/// lambda_0(x) = 2x - 2 m_g as cell averages (exact for a linear function).
DensityField adjoint_initial(const TargetMeasure& g, const Grid1D& grid);

std::vector<DensityField> forward_solve(const ControlPath& c, const DensityField& f0,
                                        const Activation& a, const RunConfig& cfg);

/// Sees every trajectory forward_solve returns, including the line-search trials. Install it
/// before any solve starts; an empty function removes it.
using ForwardObserver = std::function<void(const std::vector<DensityField>&)>;
void set_forward_observer(ForwardObserver observer);
/// Adjoint trajectory lambda_s, s = 0..T. Depends on the controls and g only.
std::vector<DensityField> adjoint_solve(const ControlPath& c, const TargetMeasure& g,
                                        const Grid1D& grid, const Activation& a,
                                        const RunConfig& cfg);

/// dx * sum tilde_loss(x_j) f_j.
double terminal_loss(const DensityField& f_T, const TargetMeasure& g);
/// (gamma_w / 2) int w^2 + (gamma_b / 2) int b^2, trapezoidal in time.
double regularization(const ControlPath& c, const RunConfig& cfg);

double reduced_cost(const ControlPath& c, const DensityField& f0, const TargetMeasure& g,
                    const Activation& a, const RunConfig& cfg);

/// g_b(t_k) = gamma_b b + dx sum lambda_{T-t_k} sigma'(w x + b) f_{t_k}; g_w carries an extra x.
ControlGradient control_gradient(const ControlPath& c, const std::vector<DensityField>& f_traj,
                                 const std::vector<DensityField>& lam_traj, const Activation& a,
                                 const RunConfig& cfg);

struct LineSearch {
  ControlPath controls;
  double rho = 0.0;
  double cost = 0.0;
  int trials = 0;
  bool sufficient_decrease = false;
};

inline constexpr double kArmijoInitialStep = 1.0;
inline constexpr double kArmijoShrink = 0.5;
inline constexpr double kArmijoDecrease = 1e-4;

/// Largest drift speed the fixed time step admits: cfl * dx * substeps / dt; infinite with
/// automatic substeps.
double cfl_speed_limit(const Grid1D& grid, const TimeGrid& time, const RunConfig& cfg);

/// Per node Euclidean projection of (w, b) onto {|sigma(w x + b)| <= limit for x in [a, b]}.
/// For monotone activations this is a pair of slabs in (w, b); GCU paths are returned as is.
ControlPath project_cfl(const ControlPath& c, const Activation& a, const Grid1D& grid,
                        double limit);

/// Projected backtracking along -grad with node 0 pinned to zero. Candidates are projected with
/// project_cfl and accepted when J(c_rho) <= J(c) + c1 <grad, c_rho - c>; any that still violate
/// the CFL bound are rejected. Without sufficient decrease the cheapest candidate that still
/// lowers the cost is taken; failing that the controls are returned unchanged with rho = 0.
LineSearch armijo_search(const ControlPath& c, const ControlGradient& grad, double cost,
                         const DensityField& f0, const TargetMeasure& g, const Activation& a,
                         const RunConfig& cfg);

/// Relative C0 change max_k max(|dw|, |db|) / max_k max(|w|, |b|) of the new iterate.
double relative_change(const ControlPath& next, const ControlPath& prev);

OptimState gauss_seidel_train(const DensityField& f0, const TargetMeasure& g,
                              const ControlPath& c0, const Activation& a, const RunConfig& cfg);

/// Root of w exp(-2w) = c on the branch w < 1/2. Throws NoRootError for c >= 1/(2e).
double solve_weight_equation(double c);

struct ClosedFormControls {
  double w;
  double b;
  /// Constant controls cannot satisfy w(0) = b(0) = 0 unless both vanish.
  bool violates_pin;
};

/// Time-constant (w, b) for the identity activation from
///   w exp(-2w) = (1/gamma_w) int x lambda_T f_0 dx,  b = (1/gamma_b) exp(w) int lambda_T f_0 dx.
ClosedFormControls identity_closed_form(const DensityField& f0, const DensityField& lam_T,
                                        const RunConfig& cfg);

/// Columns: k, cost, e_k, rho_star, max_abs_gw, max_abs_gb.
void write_iteration_csv(const std::filesystem::path& path, const OptimState& state);
/// Columns: t, w, b.
void write_controls_csv(const std::filesystem::path& path, const ControlPath& c);
ControlPath read_controls_csv(const std::filesystem::path& path);

}  // namespace optim
}  // namespace mfrn
