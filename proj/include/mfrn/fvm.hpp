#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "mfrn/core.hpp"

namespace mfrn {

/// Uniform partition of [a, b] into n_cells cells.
class Grid1D {
 public:
  Grid1D(double a, double b, int n_cells);

  double a() const { return a_; }
  double b() const { return b_; }
  int n_cells() const { return n_; }
  double dx() const { return dx_; }
  double center(int j) const { return a_ + (j + 0.5) * dx_; }
  /// Interface j sits between cells j-1 and j; interface 0 is a, interface n is b.
  double interface(int j) const { return j == n_ ? b_ : a_ + j * dx_; }
  std::vector<double> centers() const;

  bool operator==(const Grid1D&) const = default;

 private:
  double a_;
  double b_;
  int n_;
  double dx_;
};

/// Cell averages on a grid at a given time. Used for the forward density f_t and the
/// adjoint lambda_t alike.
struct DensityField {
  Grid1D grid;
  std::vector<double> values;
  double time = 0.0;

  DensityField(Grid1D g, std::vector<double> v, double t = 0.0);

  /// dx * sum of averages.
  double mass() const;
  double min_value() const;
};

/// Velocity field of the transport equation.
///
/// Forward: sigma(w(t) x + b(t)). Time-reversed (adjoint): -sigma(w(T - t) x + b(T - t)).
struct DriftSpec {
  ControlPath control;
  Activation activation;
  bool time_reversed = false;

  double speed(double x, double t) const;
};

namespace fvm {

inline constexpr double kCwenoEpsilon = 1e-6;
inline constexpr int kCwenoPower = 2;

/// Smoothness parameter the solver uses on a mesh of width dx. A fixed epsilon lets the
/// nonlinear weights drift from the linear ones at smooth extrema on practical grids, which
/// costs a full order there; scaling with dx^2 keeps third order.
inline double cweno_epsilon(double dx) { return dx * dx; }

/// Boundary extrapolated values of the central cell of a three-cell stencil.
struct EdgeValues {
  double right;  ///< U^-_{j+1/2}
  double left;   ///< U^+_{j-1/2}
};

/// Third-order CWENO reconstruction from averages (u_{j-1}, u_j, u_{j+1}).
EdgeValues cweno3_reconstruct(double u_minus, double u_center, double u_plus,
                              double epsilon = kCwenoEpsilon);

/// Local Lax-Friedrichs flux for the linear flux speed * u.
inline double llf_flux(double u_minus, double u_plus, double speed) {
  return 0.5 * (speed * u_minus + speed * u_plus) - 0.5 * std::abs(speed) * (u_plus - u_minus);
}

/// -(F_{j+1/2} - F_{j-1/2}) / dx with two zero ghost cells on each side.
std::vector<double> semidiscrete_rhs(const DensityField& field, const DriftSpec& drift, double t);

/// Largest |speed| over the grid interfaces at time t.
double max_interface_speed(const Grid1D& grid, const DriftSpec& drift, double t);

/// Positivity limiting of the reconstruction. Auto limits forward densities and leaves the
/// signed adjoint (time_reversed drift) untouched.
enum class Limiter { Auto, None, Positivity };

/// One Shu-Osher SSP-RK3 step from field.time. Throws CflError if
/// dt * max|speed| > cfl * dx at any stage time.
DensityField ssprk3_step(const DensityField& field, const DriftSpec& drift, double dt,
                         double cfl = 0.45, Limiter limiter = Limiter::Auto);

inline constexpr int kAutoSubsteps = 0;
inline constexpr int kMaxAutoSubsteps = 1 << 16;

/// Trajectory on the nodes of `grid`, including f0; `substeps` SSP-RK3 steps per interval.
/// With kAutoSubsteps each interval takes the fewest equal steps that satisfy the CFL bound.
std::vector<DensityField> solve_transport(const DensityField& f0, const DriftSpec& drift,
                                          const TimeGrid& grid, double cfl = 0.45,
                                          int substeps = 1, Limiter limiter = Limiter::Auto);

/// Cell averages by three-point Gauss-Legendre quadrature, renormalised to unit mass.
DensityField project_initial(const std::function<double(double)>& density, const Grid1D& grid);

/// Cell averages by three-point Gauss-Legendre quadrature, without renormalisation.
DensityField project_function(const std::function<double(double)>& u, const Grid1D& grid);

/// Columns: t, x_center, value; one row per cell per snapshot.
void write_csv(const std::filesystem::path& path, std::span<const DensityField> snapshots);

}  // namespace fvm
}  // namespace mfrn
