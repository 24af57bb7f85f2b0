#include "mfrn/fvm.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "mfrn/csv.hpp"

namespace mfrn {

Grid1D::Grid1D(double a, double b, int n_cells) : a_(a), b_(b), n_(n_cells), dx_(0.0) {
  if (!(b > a)) throw DomainError("grid needs b > a");
  if (n_cells < 1) throw DomainError("grid needs at least one cell");
  dx_ = (b - a) / n_cells;
}

std::vector<double> Grid1D::centers() const {
  std::vector<double> c(static_cast<std::size_t>(n_));
  for (int j = 0; j < n_; ++j) c[static_cast<std::size_t>(j)] = center(j);
  return c;
}

DensityField::DensityField(Grid1D g, std::vector<double> v, double t)
    : grid(g), values(std::move(v)), time(t) {
  if (values.size() != static_cast<std::size_t>(grid.n_cells()))
    throw DomainError("field size does not match the grid");
}

double DensityField::mass() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s * grid.dx();
}

double DensityField::min_value() const { return *std::min_element(values.begin(), values.end()); }

double DriftSpec::speed(double x, double t) const {
  if (!time_reversed) {
    const auto [w, b] = control(t);
    return activation.value(w * x + b);
  }
  const double T = control.grid().t_final();
  const auto [w, b] = control(std::max(T - t, 0.0));
  return -activation.value(w * x + b);
}

namespace fvm {

EdgeValues cweno3_reconstruct(double um, double u0, double up, double epsilon) {
  // Candidate polynomials in xi = (x - x_j) / dx:
  //   P_L = u0 + (u0 - um) xi,  P_R = u0 + (up - u0) xi,
  //   P_opt = u0 - d2/24 + (up - um)/2 xi + d2/2 xi^2,  d2 = up - 2 u0 + um,
  //   P_0 = (P_opt - P_L/4 - P_R/4) / (1/2).
  constexpr double d0 = 0.5, dl = 0.25, dr = 0.25;
  const double d2 = up - 2.0 * u0 + um;
  const double sl = u0 - um;
  const double sr = up - u0;

  const double is_l = sl * sl;
  const double is_r = sr * sr;
  const double c1 = 0.5 * (up - um);
  const double is_0 = c1 * c1 + 13.0 / 3.0 * d2 * d2;

  auto alpha = [epsilon](double d, double is) {
    const double s = epsilon + is;
    return d / (s * s);
  };
  const double al = alpha(dl, is_l);
  const double ar = alpha(dr, is_r);
  const double a0 = alpha(d0, is_0);
  const double sum = al + ar + a0;
  const double wl = al / sum, wr = ar / sum, w0 = a0 / sum;

  auto p_opt = [&](double xi) { return u0 - d2 / 24.0 + c1 * xi + 0.5 * d2 * xi * xi; };
  auto p_l = [&](double xi) { return u0 + sl * xi; };
  auto p_r = [&](double xi) { return u0 + sr * xi; };
  auto p_0 = [&](double xi) { return (p_opt(xi) - dl * p_l(xi) - dr * p_r(xi)) / d0; };
  auto blend = [&](double xi) { return w0 * p_0(xi) + wl * p_l(xi) + wr * p_r(xi); };
  return {blend(0.5), blend(-0.5)};
}

namespace {

constexpr int kGhost = 2;

// Interface speeds at one stage time.
void interface_speeds(const Grid1D& grid, const DriftSpec& drift, double t,
                      std::vector<double>& speeds) {
  const int n = grid.n_cells();
  speeds.resize(static_cast<std::size_t>(n) + 1);
  double w = 0.0, b = 0.0, sign = 1.0;
  if (!drift.time_reversed) {
    std::tie(w, b) = drift.control(t);
  } else {
    const double T = drift.control.grid().t_final();
    std::tie(w, b) = drift.control(std::max(T - t, 0.0));
    sign = -1.0;
  }
  for (int i = 0; i <= n; ++i)
    speeds[static_cast<std::size_t>(i)] = sign * drift.activation.value(w * grid.interface(i) + b);
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

struct Workspace {
  std::vector<double> padded;
  std::vector<double> right_edge;  // U^- at the right edge of padded cell
  std::vector<double> left_edge;   // U^+ at the left edge of padded cell
  std::vector<double> flux;
};

// Scales the reconstruction of each cell towards its mean so that its edge values stay
// nonnegative and a forward Euler step of length lambda * dx cannot drive the average below zero.
void limit_positivity(const Grid1D& grid, const std::vector<double>& speeds, double lambda,
                      Workspace& ws) {
  const int n = grid.n_cells();
  const std::size_t np = ws.padded.size();
  auto speed_at = [&](int i) {
    return (i < 0 || i > n) ? 0.0 : speeds[static_cast<std::size_t>(i)];
  };
  for (std::size_t p = 1; p + 1 < np; ++p) {
    const double u = ws.padded[p];
    if (u < 0.0) {
      // Roundoff-level negative mean: first-order upwinding keeps it from growing.
      ws.right_edge[p] = ws.left_edge[p] = u;
      continue;
    }
    const int j = static_cast<int>(p) - kGhost;
    double& er = ws.right_edge[p];
    double& el = ws.left_edge[p];
    double theta = 1.0;
    if (er < 0.0) theta = std::min(theta, u / (u - er));
    if (el < 0.0) theta = std::min(theta, u / (u - el));
    const double out_r = std::max(speed_at(j + 1), 0.0);
    const double out_l = std::max(-speed_at(j), 0.0);
    const double excess = out_r * (er - u) + out_l * (el - u);
    if (excess > 0.0) {
      const double room = u * (1.0 - lambda * (out_r + out_l));
      theta = std::min(theta, std::max(room, 0.0) / (lambda * excess));
    }
    if (theta < 1.0) {
      er = u + theta * (er - u);
      el = u + theta * (el - u);
    }
  }
}

// out[j] = -(F_{j+1} - F_j) / dx, with F_i at interface i. lambda = dt / dx > 0 switches on the
// positivity limiter for a forward Euler stage of that length.
void rhs_into(const Grid1D& grid, std::span<const double> u, const std::vector<double>& speeds,
              Workspace& ws, std::span<double> out, double lambda = 0.0) {
  const int n = grid.n_cells();
  const auto np = static_cast<std::size_t>(n + 2 * kGhost);
  ws.padded.assign(np, 0.0);
  std::copy(u.begin(), u.end(), ws.padded.begin() + kGhost);
  ws.right_edge.assign(np, 0.0);
  ws.left_edge.assign(np, 0.0);
  // Reconstruct on cells -1..n (padded indices 1..n+2).
  const double eps = cweno_epsilon(grid.dx());
  for (std::size_t p = 1; p + 1 < np; ++p) {
    const EdgeValues e =
        cweno3_reconstruct(ws.padded[p - 1], ws.padded[p], ws.padded[p + 1], eps);
    ws.right_edge[p] = e.right;
    ws.left_edge[p] = e.left;
  }
  if (lambda > 0.0) limit_positivity(grid, speeds, lambda, ws);
  ws.flux.resize(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) {
    // Interface i: left cell i-1 -> padded i-1+kGhost, right cell i -> padded i+kGhost.
    const auto pl = static_cast<std::size_t>(i - 1 + kGhost);
    const auto pr = static_cast<std::size_t>(i + kGhost);
    ws.flux[static_cast<std::size_t>(i)] =
        llf_flux(ws.right_edge[pl], ws.left_edge[pr], speeds[static_cast<std::size_t>(i)]);
  }
  const double inv_dx = 1.0 / grid.dx();
  for (int j = 0; j < n; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    out[jj] = -(ws.flux[jj + 1] - ws.flux[jj]) * inv_dx;
  }
}

}  // namespace

std::vector<double> semidiscrete_rhs(const DensityField& field, const DriftSpec& drift, double t) {
  std::vector<double> speeds;
  interface_speeds(field.grid, drift, t, speeds);
  Workspace ws;
  std::vector<double> out(field.values.size());
  rhs_into(field.grid, field.values, speeds, ws, out);
  return out;
}

double max_interface_speed(const Grid1D& grid, const DriftSpec& drift, double t) {
  std::vector<double> speeds;
  interface_speeds(grid, drift, t, speeds);
  return max_abs(speeds);
}

namespace {

bool resolve(Limiter limiter, const DriftSpec& drift) {
  switch (limiter) {
    case Limiter::None: return false;
    case Limiter::Positivity: return true;
    case Limiter::Auto: break;
  }
  return !drift.time_reversed;
}

class Stepper {
 public:
  Stepper(const Grid1D& grid, const DriftSpec& drift, double cfl, Limiter limiter)
      : grid_(grid), drift_(drift), cfl_(cfl), positive_(resolve(limiter, drift)) {}

  void step(std::vector<double>& u, double t, double dt) {
    interface_speeds(grid_, drift_, t, s0_);
    interface_speeds(grid_, drift_, t + dt, s1_);
    interface_speeds(grid_, drift_, t + 0.5 * dt, s2_);
    const double vmax = std::max({max_abs(s0_), max_abs(s1_), max_abs(s2_)});
    if (dt * vmax > cfl_ * grid_.dx() * (1.0 + 1e-12)) throw CflError(vmax, dt, grid_.dx(), cfl_);

    const std::size_t n = u.size();
    const double lambda = positive_ ? dt / grid_.dx() : 0.0;
    k_.resize(n);
    u1_.resize(n);
    u2_.resize(n);
    rhs_into(grid_, u, s0_, ws_, k_, lambda);
    for (std::size_t j = 0; j < n; ++j) u1_[j] = u[j] + dt * k_[j];
    rhs_into(grid_, u1_, s1_, ws_, k_, lambda);
    for (std::size_t j = 0; j < n; ++j) u2_[j] = 0.75 * u[j] + 0.25 * (u1_[j] + dt * k_[j]);
    rhs_into(grid_, u2_, s2_, ws_, k_, lambda);
    for (std::size_t j = 0; j < n; ++j)
      u[j] = u[j] / 3.0 + 2.0 / 3.0 * (u2_[j] + dt * k_[j]);
  }

 private:
  const Grid1D& grid_;
  const DriftSpec& drift_;
  double cfl_;
  bool positive_;
  std::vector<double> s0_, s1_, s2_, k_, u1_, u2_;
  Workspace ws_;
};

}  // namespace

DensityField ssprk3_step(const DensityField& field, const DriftSpec& drift, double dt,
                         double cfl, Limiter limiter) {
  if (!(dt > 0.0)) throw DomainError("time step must be positive");
  Stepper stepper(field.grid, drift, cfl, limiter);
  std::vector<double> u = field.values;
  stepper.step(u, field.time, dt);
  return DensityField(field.grid, std::move(u), field.time + dt);
}

std::vector<DensityField> solve_transport(const DensityField& f0, const DriftSpec& drift,
                                          const TimeGrid& grid, double cfl, int substeps,
                                          Limiter limiter) {
  if (substeps < 0) throw DomainError("substeps must be nonnegative");
  if (std::abs(grid.t_final() - drift.control.grid().t_final()) > 1e-12 * grid.t_final())
    throw DomainError("transport horizon differs from the control horizon");
  Stepper stepper(f0.grid, drift, cfl, limiter);
  std::vector<DensityField> out;
  out.reserve(grid.n_nodes());
  out.emplace_back(f0.grid, f0.values, 0.0);
  std::vector<double> u = f0.values;
  std::vector<double> start;
  for (int k = 0; k < grid.n_steps(); ++k) {
    const double t0 = grid.node(k);
    int m = substeps;
    if (m == kAutoSubsteps) {
      const double vmax = std::max({max_interface_speed(f0.grid, drift, t0),
                                    max_interface_speed(f0.grid, drift, t0 + 0.5 * grid.dt()),
                                    max_interface_speed(f0.grid, drift, grid.node(k + 1))});
      const double need = grid.dt() * vmax / (cfl * f0.grid.dx());
      m = std::max(1, static_cast<int>(std::ceil(need * (1.0 + 1e-9))));
      start = u;
    }
    for (;;) {
      const double h = grid.dt() / m;
      try {
        for (int s = 0; s < m; ++s) stepper.step(u, t0 + s * h, h);
        break;
      } catch (const CflError&) {
        // Stage times inside the interval can exceed the endpoint speeds for GCU.
        if (substeps != kAutoSubsteps || m >= kMaxAutoSubsteps) throw;
        u = start;
        m *= 2;
      }
    }
    out.emplace_back(f0.grid, u, grid.node(k + 1));
  }
  return out;
}

namespace {

std::vector<double> gauss_averages(const std::function<double(double)>& u, const Grid1D& grid) {
  static const double node = std::sqrt(3.0 / 5.0);
  const double half = 0.5 * grid.dx();
  std::vector<double> avg(static_cast<std::size_t>(grid.n_cells()));
  for (int j = 0; j < grid.n_cells(); ++j) {
    const double xc = grid.center(j);
    const double fm = u(xc - node * half);
    const double f0 = u(xc);
    const double fp = u(xc + node * half);
    if (!std::isfinite(fm) || !std::isfinite(f0) || !std::isfinite(fp))
      throw DomainError("non-finite initial data in cell " + std::to_string(j));
    avg[static_cast<std::size_t>(j)] = (5.0 * fm + 8.0 * f0 + 5.0 * fp) / 18.0;
  }
  return avg;
}

}  // namespace

DensityField project_function(const std::function<double(double)>& u, const Grid1D& grid) {
  return DensityField(grid, gauss_averages(u, grid));
}

DensityField project_initial(const std::function<double(double)>& density, const Grid1D& grid) {
  DensityField f(grid, gauss_averages(density, grid));
  const double m = f.mass();
  if (!(m > 0.0)) throw DomainError("initial density has no positive mass on the grid");
  for (double& v : f.values) v /= m;
  return f;
}

void write_csv(const std::filesystem::path& path, std::span<const DensityField> snapshots) {
  std::vector<std::vector<double>> rows;
  for (const auto& f : snapshots)
    for (int j = 0; j < f.grid.n_cells(); ++j)
      rows.push_back({f.time, f.grid.center(j), f.values[static_cast<std::size_t>(j)]});
  csv::write(path, {"t", "x_center", "value"}, rows);
}

}  // namespace fvm
}  // namespace mfrn
