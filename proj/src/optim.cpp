#include "mfrn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>
#include <tuple>

#include "mfrn/csv.hpp"

namespace mfrn {

TargetMeasure TargetMeasure::from_density(DensityField g) {
  if (std::abs(g.mass() - 1.0) > 1e-8) throw DomainError("target density must have unit mass");
  TargetMeasure t;
  t.mean = measures::moment(g, 1);
  t.second_moment = measures::moment(g, 2);
  t.density = std::move(g);
  return t;
}

TargetMeasure TargetMeasure::from_samples(EmpiricalMeasure g) {
  TargetMeasure t;
  t.mean = measures::moment(g, 1);
  t.second_moment = std::max(measures::moment(g, 2), t.mean * t.mean);
  t.samples = std::move(g);
  return t;
}

TargetMeasure TargetMeasure::point_mass(double y) {
  return from_samples(EmpiricalMeasure({{y, 1.0}}));
}

double ControlGradient::max_abs_w() const {
  double m = 0.0;
  for (double v : w) m = std::max(m, std::abs(v));
  return m;
}

double ControlGradient::max_abs_b() const {
  double m = 0.0;
  for (double v : b) m = std::max(m, std::abs(v));
  return m;
}

namespace optim {

double tilde_loss(double x, const TargetMeasure& g) {
  return x * x - 2.0 * g.mean * x + g.second_moment;
}

DensityField adjoint_initial(const TargetMeasure& g, const Grid1D& grid) {
  std::vector<double> v(static_cast<std::size_t>(grid.n_cells()));
  for (int j = 0; j < grid.n_cells(); ++j)
    v[static_cast<std::size_t>(j)] = 2.0 * grid.center(j) - 2.0 * g.mean;
  return DensityField(grid, std::move(v), 0.0);
}

namespace {
ForwardObserver& forward_observer() {
  static ForwardObserver observer;
  return observer;
}
}  // namespace

void set_forward_observer(ForwardObserver observer) { forward_observer() = std::move(observer); }

std::vector<DensityField> forward_solve(const ControlPath& c, const DensityField& f0,
                                        const Activation& a, const RunConfig& cfg) {
  auto traj = fvm::solve_transport(f0, DriftSpec{c, a, false}, c.grid(), cfg.cfl, cfg.substeps);
  if (forward_observer()) forward_observer()(traj);
  return traj;
}

std::vector<DensityField> adjoint_solve(const ControlPath& c, const TargetMeasure& g,
                                        const Grid1D& grid, const Activation& a,
                                        const RunConfig& cfg) {
  return fvm::solve_transport(adjoint_initial(g, grid), DriftSpec{c, a, true}, c.grid(), cfg.cfl,
                              cfg.substeps);
}

double terminal_loss(const DensityField& f_T, const TargetMeasure& g) {
  double s = 0.0;
  for (int j = 0; j < f_T.grid.n_cells(); ++j)
    s += tilde_loss(f_T.grid.center(j), g) * f_T.values[static_cast<std::size_t>(j)];
  return s * f_T.grid.dx();
}

namespace {

// Trapezoidal weights on the time nodes.
double trap_weight(const TimeGrid& grid, std::size_t k) {
  return (k == 0 || k == static_cast<std::size_t>(grid.n_steps())) ? 0.5 * grid.dt() : grid.dt();
}

}  // namespace

double regularization(const ControlPath& c, const RunConfig& cfg) {
  double sw = 0.0, sb = 0.0;
  for (std::size_t k = 0; k < c.w().size(); ++k) {
    const double h = trap_weight(c.grid(), k);
    sw += h * c.w()[k] * c.w()[k];
    sb += h * c.b()[k] * c.b()[k];
  }
  return 0.5 * cfg.gamma_w * sw + 0.5 * cfg.gamma_b * sb;
}

double reduced_cost(const ControlPath& c, const DensityField& f0, const TargetMeasure& g,
                    const Activation& a, const RunConfig& cfg) {
  const auto traj = forward_solve(c, f0, a, cfg);
  return terminal_loss(traj.back(), g) + regularization(c, cfg);
}

ControlGradient control_gradient(const ControlPath& c, const std::vector<DensityField>& f_traj,
                                 const std::vector<DensityField>& lam_traj, const Activation& a,
                                 const RunConfig& cfg) {
  const std::size_t nodes = c.grid().n_nodes();
  if (f_traj.size() != nodes || lam_traj.size() != nodes)
    throw DomainError("trajectory length does not match the control grid");
  ControlGradient g{std::vector<double>(nodes), std::vector<double>(nodes)};
  for (std::size_t k = 0; k < nodes; ++k) {
    const DensityField& f = f_traj[k];
    const DensityField& lam = lam_traj[nodes - 1 - k];
    if (!(f.grid == lam.grid)) throw DomainError("forward and adjoint grids differ");
    const double w = c.w()[k], b = c.b()[k];
    double ib = 0.0, iw = 0.0;
    for (int j = 0; j < f.grid.n_cells(); ++j) {
      const auto jj = static_cast<std::size_t>(j);
      const double x = f.grid.center(j);
      const double term = lam.values[jj] * a.derivative(w * x + b) * f.values[jj];
      ib += term;
      iw += term * x;
    }
    g.b[k] = cfg.gamma_b * b + f.grid.dx() * ib;
    g.w[k] = cfg.gamma_w * w + f.grid.dx() * iw;
  }
  return g;
}

double cfl_speed_limit(const Grid1D& grid, const TimeGrid& time, const RunConfig& cfg) {
  if (cfg.substeps == fvm::kAutoSubsteps) return std::numeric_limits<double>::infinity();
  return cfg.cfl * grid.dx() * cfg.substeps / time.dt();
}

namespace {

// Admissible range of z = w x + b for |sigma(z)| <= v.
std::pair<double, double> admissible_arguments(const Activation& a, double v) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  switch (a.kind()) {
    case ActivationKind::Identity: return {-v, v};
    case ActivationKind::ReLU: return {-inf, v};
    case ActivationKind::Tanh: return v < 1.0 ? std::pair{-std::atanh(v), std::atanh(v)}
                                              : std::pair{-inf, inf};
    case ActivationKind::Sigmoid: return {-inf, v < 1.0 ? std::log(v / (1.0 - v)) : inf};
    case ActivationKind::GCU: break;
  }
  return {-inf, inf};
}

// Closest point to (w, b) with lo <= w x + b <= hi for x in {x0, x1}.
std::pair<double, double> project_node(double w, double b, double x0, double x1, double lo,
                                       double hi) {
  auto feasible = [&](double ww, double bb) {
    constexpr double slack = 1e-12;
    for (double x : {x0, x1}) {
      const double z = ww * x + bb;
      if (z < lo - slack * std::max(1.0, std::abs(lo)) ||
          z > hi + slack * std::max(1.0, std::abs(hi)))
        return false;
    }
    return true;
  };
  if (feasible(w, b)) return {w, b};
  std::vector<std::pair<double, double>> cand;
  std::vector<std::pair<double, double>> lines;  // (x, level)
  for (double x : {x0, x1})
    for (double z : {lo, hi})
      if (std::isfinite(z)) lines.emplace_back(x, z);
  for (const auto& [x, z] : lines) {
    // Orthogonal projection onto w x + b = z; the normal is (x, 1).
    const double r = (w * x + b - z) / (x * x + 1.0);
    cand.emplace_back(w - r * x, b - r);
  }
  for (std::size_t i = 0; i < lines.size(); ++i)
    for (std::size_t k = i + 1; k < lines.size(); ++k) {
      const auto [xi, zi] = lines[i];
      const auto [xk, zk] = lines[k];
      if (xi == xk) continue;
      const double ww = (zi - zk) / (xi - xk);
      cand.emplace_back(ww, zi - ww * xi);
    }
  std::pair<double, double> best{w, b};
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& [cw, cb] : cand) {
    if (!feasible(cw, cb)) continue;
    const double d = (cw - w) * (cw - w) + (cb - b) * (cb - b);
    if (d < best_d) {
      best_d = d;
      best = {cw, cb};
    }
  }
  return best;
}

}  // namespace

ControlPath project_cfl(const ControlPath& c, const Activation& a, const Grid1D& grid,
                        double limit) {
  if (!std::isfinite(limit)) return c;
  const auto [lo, hi] = admissible_arguments(a, limit * (1.0 - 1e-9));
  if (!std::isfinite(lo) && !std::isfinite(hi)) return c;
  std::vector<double> w = c.w(), b = c.b();
  for (std::size_t k = 0; k < w.size(); ++k)
    std::tie(w[k], b[k]) = project_node(w[k], b[k], grid.a(), grid.b(), lo, hi);
  return ControlPath(c.grid(), std::move(w), std::move(b));
}

LineSearch armijo_search(const ControlPath& c, const ControlGradient& grad, double cost,
                         const DensityField& f0, const TargetMeasure& g, const Activation& a,
                         const RunConfig& cfg) {
  const TimeGrid& grid = c.grid();
  const std::size_t nodes = grid.n_nodes();
  const double limit = cfl_speed_limit(f0.grid, grid, cfg);

  auto candidate = [&](double rho) {
    std::vector<double> w(nodes), b(nodes);
    for (std::size_t k = 1; k < nodes; ++k) {
      w[k] = c.w()[k] - rho * grad.w[k];
      b[k] = c.b()[k] - rho * grad.b[k];
    }
    return project_cfl(ControlPath(grid, std::move(w), std::move(b)), a, f0.grid, limit);
  };
  // <grad, trial - c> in the trapezoidal L2 product.
  auto slope = [&](const ControlPath& trial) {
    double s = 0.0;
    for (std::size_t k = 0; k < nodes; ++k)
      s += trap_weight(grid, k) * (grad.w[k] * (trial.w()[k] - c.w()[k]) +
                                   grad.b[k] * (trial.b()[k] - c.b()[k]));
    return s;
  };

  std::optional<LineSearch> best;
  double rho = kArmijoInitialStep;
  for (int m = 0; m < cfg.max_armijo; ++m, rho *= kArmijoShrink) {
    ControlPath trial = candidate(rho);
    double j = std::numeric_limits<double>::infinity();
    try {
      j = reduced_cost(trial, f0, g, a, cfg);
    } catch (const CflError&) {
      continue;
    }
    if (!std::isfinite(j)) continue;
    const double decrease = slope(trial);
    if (decrease < 0.0 && j <= cost + kArmijoDecrease * decrease)
      return {std::move(trial), rho, j, m + 1, true};
    if (!best || j < best->cost) best = LineSearch{std::move(trial), rho, j, m + 1, false};
  }
  if (best && best->cost < cost) {
    best->trials = cfg.max_armijo;
    return *best;
  }
  return {c, 0.0, cost, cfg.max_armijo, false};
}

double relative_change(const ControlPath& next, const ControlPath& prev) {
  double diff = 0.0;
  for (std::size_t k = 0; k < next.w().size(); ++k)
    diff = std::max({diff, std::abs(next.w()[k] - prev.w()[k]), std::abs(next.b()[k] - prev.b()[k])});
  const double norm = next.sup_norm();
  if (diff == 0.0) return 0.0;
  return norm > 0.0 ? diff / norm : std::numeric_limits<double>::infinity();
}

OptimState gauss_seidel_train(const DensityField& f0, const TargetMeasure& g,
                              const ControlPath& c0, const Activation& a, const RunConfig& cfg) {
  cfg.validate();
  if (!c0.admissible()) throw DomainError("initial controls must satisfy w(0) = b(0) = 0");
  OptimState st{c0, {}, {}, {}, {}, {}, 0, false, false, {}};
  if (!a.bounded()) {
    st.warnings.push_back(std::string(a.name()) +
                          " is unbounded; well-posedness relies on compactly supported f_0");
  }

  auto evaluate = [&](const ControlPath& c, double& cost) {
    const auto f_traj = forward_solve(c, f0, a, cfg);
    const auto lam_traj = adjoint_solve(c, g, f0.grid, a, cfg);
    cost = terminal_loss(f_traj.back(), g) + regularization(c, cfg);
    if (!std::isfinite(cost)) throw DivergenceError("non-finite cost at iteration " + std::to_string(st.iteration));
    return control_gradient(c, f_traj, lam_traj, a, cfg);
  };

  double cost = 0.0;
  ControlGradient grad = evaluate(st.controls, cost);
  st.cost_history.push_back(cost);
  st.max_grad_w.push_back(grad.max_abs_w());
  st.max_grad_b.push_back(grad.max_abs_b());

  while (st.iteration < cfg.max_iterations) {
    LineSearch ls = armijo_search(st.controls, grad, cost, f0, g, a, cfg);
    const double e = relative_change(ls.controls, st.controls);
    st.controls = std::move(ls.controls);
    ++st.iteration;
    grad = evaluate(st.controls, cost);
    st.cost_history.push_back(cost);
    st.rel_error_history.push_back(e);
    st.rho_history.push_back(ls.rho);
    st.max_grad_w.push_back(grad.max_abs_w());
    st.max_grad_b.push_back(grad.max_abs_b());
    if (e <= cfg.tol) {
      st.converged = true;
      st.stalled = ls.rho == 0.0;
      break;
    }
  }
  return st;
}

double solve_weight_equation(double c) {
  const double c_max = 0.5 * std::exp(-1.0);
  if (!(c < c_max)) {
    throw NoRootError("w exp(-2w) = c has no root on w < 1/2 for c >= 1/(2e) = " +
                      csv::format(c_max) + " (got c = " + csv::format(c) + ")");
  }
  auto f = [c](double w) { return w * std::exp(-2.0 * w) - c; };
  auto df = [](double w) { return std::exp(-2.0 * w) * (1.0 - 2.0 * w); };
  // f is increasing on (-inf, 1/2]; bracket the root.
  double lo = c >= 0.0 ? 0.0 : c;
  double hi = c >= 0.0 ? 0.5 : 0.0;
  if (f(lo) == 0.0) return lo;
  double w = c >= 0.0 ? c : 0.5 * c;
  for (int it = 0; it < 200; ++it) {
    const double fw = f(w);
    if (fw == 0.0) return w;
    if (fw < 0.0) lo = w;
    else hi = w;
    const double d = df(w);
    double next = d > 0.0 ? w - fw / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - w) <= 1e-16 * std::max(1.0, std::abs(w)) || hi - lo <= 1e-16) return next;
    w = next;
  }
  return w;
}

ClosedFormControls identity_closed_form(const DensityField& f0, const DensityField& lam_T,
                                        const RunConfig& cfg) {
  if (!(cfg.gamma_w > 0.0) || !(cfg.gamma_b > 0.0))
    throw DomainError("closed form needs gamma_w > 0 and gamma_b > 0");
  if (!(f0.grid == lam_T.grid)) throw DomainError("f0 and lambda_T live on different grids");
  double i0 = 0.0, i1 = 0.0;
  for (int j = 0; j < f0.grid.n_cells(); ++j) {
    const auto jj = static_cast<std::size_t>(j);
    const double p = lam_T.values[jj] * f0.values[jj];
    i0 += p;
    i1 += f0.grid.center(j) * p;
  }
  i0 *= f0.grid.dx();
  i1 *= f0.grid.dx();
  const double w = solve_weight_equation(i1 / cfg.gamma_w);
  const double b = std::exp(w) * i0 / cfg.gamma_b;
  return {w, b, w != 0.0 || b != 0.0};
}

void write_iteration_csv(const std::filesystem::path& path, const OptimState& st) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < st.cost_history.size(); ++k) {
    const double e = k == 0 ? nan : st.rel_error_history[k - 1];
    const double rho = k == 0 ? nan : st.rho_history[k - 1];
    rows.push_back({static_cast<double>(k), st.cost_history[k], e, rho, st.max_grad_w[k],
                    st.max_grad_b[k]});
  }
  csv::write(path, {"k", "cost", "e_k", "rho_star", "max_abs_gw", "max_abs_gb"}, rows);
}

void write_controls_csv(const std::filesystem::path& path, const ControlPath& c) {
  std::vector<std::vector<double>> rows;
  for (int k = 0; k <= c.grid().n_steps(); ++k) {
    const auto [w, b] = c.at_node(k);
    rows.push_back({c.grid().node(k), w, b});
  }
  csv::write(path, {"t", "w", "b"}, rows);
}

ControlPath read_controls_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read(path);
  const auto ts = t.column("t");
  if (ts.size() < 2) throw Error(path.string() + ": need at least two control nodes");
  const TimeGrid grid(ts.back(), static_cast<int>(ts.size()) - 1);
  return ControlPath(grid, t.column("w"), t.column("b"));
}

}  // namespace optim
}  // namespace mfrn
