#include "mfrn/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mfrn {

EmpiricalMeasure::EmpiricalMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
  if (atoms_.empty()) throw DomainError("empirical measure needs at least one atom");
  long double total = 0.0L;
  for (const auto& a : atoms_) {
    if (!(a.weight >= 0.0) || !std::isfinite(a.location))
      throw DomainError("empirical measure needs finite locations and nonnegative weights");
    total += a.weight;
  }
  if (std::abs(static_cast<double>(total) - 1.0) > 1e-12)
    throw DomainError("empirical measure weights must sum to 1");
}

EmpiricalMeasure EmpiricalMeasure::uniform(const std::vector<double>& locations) {
  std::vector<Atom> atoms;
  atoms.reserve(locations.size());
  const double w = 1.0 / static_cast<double>(locations.size());
  for (double x : locations) atoms.push_back({x, w});
  return EmpiricalMeasure(std::move(atoms));
}

namespace measures {
namespace {

constexpr double kMassTolerance = 1e-8;

void require_unit_mass(const DensityField& f) {
  if (std::abs(f.mass() - 1.0) > kMassTolerance)
    throw DomainError("measure is not normalised (mass " + std::to_string(f.mass()) + ")");
}

// Piecewise-linear CDF of a cell-average field.
class DensityCdf {
 public:
  explicit DensityCdf(const DensityField& f) : f_(f), cum_(f.values.size() + 1, 0.0) {
    for (std::size_t j = 0; j < f.values.size(); ++j) cum_[j + 1] = cum_[j] + f.values[j] * f.grid.dx();
  }

  double operator()(double x) const {
    const Grid1D& g = f_.grid;
    if (x <= g.a()) return 0.0;
    if (x >= g.b()) return cum_.back();
    int j = static_cast<int>(std::floor((x - g.a()) / g.dx()));
    j = std::clamp(j, 0, g.n_cells() - 1);
    return cum_[static_cast<std::size_t>(j)] +
           (x - g.interface(j)) * f_.values[static_cast<std::size_t>(j)];
  }

  void breakpoints(std::vector<double>& out) const {
    for (int i = 0; i <= f_.grid.n_cells(); ++i) out.push_back(f_.grid.interface(i));
  }

 private:
  const DensityField& f_;
  std::vector<double> cum_;
};

// Step CDF of an atomic measure.
class AtomCdf {
 public:
  explicit AtomCdf(const EmpiricalMeasure& m) {
    auto atoms = m.atoms();
    std::sort(atoms.begin(), atoms.end(),
              [](const auto& l, const auto& r) { return l.location < r.location; });
    loc_.reserve(atoms.size());
    cum_.push_back(0.0);
    for (const auto& a : atoms) {
      loc_.push_back(a.location);
      cum_.push_back(cum_.back() + a.weight);
    }
  }

  /// F(x) including an atom at x.
  double right(double x) const {
    const auto it = std::upper_bound(loc_.begin(), loc_.end(), x);
    return cum_[static_cast<std::size_t>(it - loc_.begin())];
  }
  /// F(x-) excluding an atom at x.
  double left(double x) const {
    const auto it = std::lower_bound(loc_.begin(), loc_.end(), x);
    return cum_[static_cast<std::size_t>(it - loc_.begin())];
  }

  void breakpoints(std::vector<double>& out) const { out.insert(out.end(), loc_.begin(), loc_.end()); }

 private:
  std::vector<double> loc_;
  std::vector<double> cum_;
};

struct DensityView {
  DensityCdf cdf;
  double right(double x) const { return cdf(x); }
  double left(double x) const { return cdf(x); }
  void breakpoints(std::vector<double>& out) const { cdf.breakpoints(out); }
};

// Exact integral of |d| for d linear on [0, h] with end values dp, dq.
double abs_linear_integral(double dp, double dq, double h) {
  if ((dp >= 0.0 && dq >= 0.0) || (dp <= 0.0 && dq <= 0.0)) return 0.5 * h * std::abs(dp + dq);
  return 0.5 * h * (dp * dp + dq * dq) / (std::abs(dp) + std::abs(dq));
}

template <class A, class B>
double cdf_distance(const A& fa, const B& fb) {
  std::vector<double> pts;
  fa.breakpoints(pts);
  fb.breakpoints(pts);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double p = pts[i], q = pts[i + 1];
    const double dp = fa.right(p) - fb.right(p);
    const double dq = fa.left(q) - fb.left(q);
    total += abs_linear_integral(dp, dq, q - p);
  }
  return total;
}

}  // namespace

double wasserstein1(const DensityField& mu, const DensityField& nu) {
  require_unit_mass(mu);
  require_unit_mass(nu);
  return cdf_distance(DensityView{DensityCdf(mu)}, DensityView{DensityCdf(nu)});
}

double wasserstein1(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  return cdf_distance(AtomCdf(mu), AtomCdf(nu));
}

double wasserstein1(const DensityField& mu, const EmpiricalMeasure& nu) {
  require_unit_mass(mu);
  return cdf_distance(DensityView{DensityCdf(mu)}, AtomCdf(nu));
}

double wasserstein1(const EmpiricalMeasure& mu, const DensityField& nu) { return wasserstein1(nu, mu); }

double moment(const DensityField& m, int k) {
  if (k < 0) throw DomainError("moment order must be nonnegative");
  double s = 0.0;
  for (int j = 0; j < m.grid.n_cells(); ++j)
    s += std::pow(m.grid.center(j), k) * m.values[static_cast<std::size_t>(j)];
  return s * m.grid.dx();
}

double moment(const EmpiricalMeasure& m, int k) {
  if (k < 0) throw DomainError("moment order must be nonnegative");
  double s = 0.0;
  for (const auto& a : m.atoms()) s += a.weight * std::pow(a.location, k);
  return s;
}

std::vector<double> steady_state_support(double w_bar, double b_bar, const Activation& a,
                                         std::optional<std::array<double, 2>> domain) {
  if (w_bar == 0.0) throw DomainError("steady state needs w_bar of maximum rank (w_bar != 0)");
  std::vector<double> zeros;
  switch (a.kind()) {
    case ActivationKind::Identity:
    case ActivationKind::Tanh: zeros.push_back(0.0); break;
    case ActivationKind::Sigmoid: break;
    case ActivationKind::ReLU:
      throw DomainError("relu vanishes on a half line; its steady states are not discrete");
    case ActivationKind::GCU: {
      if (!domain) throw DomainError("gcu has infinitely many zeros; a domain is required");
      const double z1 = w_bar * (*domain)[0] + b_bar;
      const double z2 = w_bar * (*domain)[1] + b_bar;
      const double lo = std::min(z1, z2), hi = std::max(z1, z2);
      zeros.push_back(0.0);
      // pi/2 + k pi
      const auto k_lo = static_cast<long>(std::ceil((lo - std::numbers::pi / 2) / std::numbers::pi));
      const auto k_hi = static_cast<long>(std::floor((hi - std::numbers::pi / 2) / std::numbers::pi));
      for (long k = k_lo; k <= k_hi; ++k)
        zeros.push_back(std::numbers::pi / 2 + static_cast<double>(k) * std::numbers::pi);
      break;
    }
  }
  std::vector<double> support;
  for (double z : zeros) {
    const double y = (z - b_bar) / w_bar;
    if (domain && (y < (*domain)[0] || y > (*domain)[1])) continue;
    support.push_back(y);
  }
  std::sort(support.begin(), support.end());
  return support;
}

SteadyStateSpec make_steady_state(double w_bar, double b_bar, const Activation& a,
                                  std::vector<double> masses,
                                  std::optional<std::array<double, 2>> domain) {
  SteadyStateSpec s{w_bar, b_bar, {}, steady_state_support(w_bar, b_bar, a, domain),
                    std::move(masses)};
  if (s.masses.size() != s.support.size())
    throw DomainError("one mass per support point is required");
  double total = 0.0;
  for (double r : s.masses) {
    if (r < 0.0 || r > 1.0) throw DomainError("steady-state masses must lie in [0, 1]");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("steady-state masses must sum to 1");
  for (double y : s.support) s.zeros.push_back(w_bar * y + b_bar);
  return s;
}

Histogram particles_to_density(const ParticleEnsemble& ens, const Grid1D& grid) {
  if (ens.dimension() != 1) throw DomainError("histogram projection needs d = 1");
  std::vector<double> counts(static_cast<std::size_t>(grid.n_cells()), 0.0);
  std::size_t outside = 0;
  for (double x : ens.states()) {
    if (!(x >= grid.a() && x <= grid.b())) {
      ++outside;
      continue;
    }
    int j = static_cast<int>(std::floor((x - grid.a()) / grid.dx()));
    j = std::clamp(j, 0, grid.n_cells() - 1);
    counts[static_cast<std::size_t>(j)] += 1.0;
  }
  const std::size_t inside = ens.size() - outside;
  if (inside == 0) throw DomainError("every particle lies outside the grid");
  const double scale = 1.0 / (static_cast<double>(inside) * grid.dx());
  for (double& c : counts) c *= scale;
  return {DensityField(grid, std::move(counts), ens.time()), outside};
}

}  // namespace measures
}  // namespace mfrn
