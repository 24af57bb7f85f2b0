#pragma once

#include <array>
#include <optional>
#include <vector>

#include "mfrn/core.hpp"
#include "mfrn/fvm.hpp"
#include "mfrn/particle.hpp"

namespace mfrn {

/// Weighted point masses on the real line.
class EmpiricalMeasure {
 public:
  struct Atom {
    double location;
    double weight;
  };

  /// Throws DomainError unless weights are nonnegative and sum to 1 within 1e-12.
  explicit EmpiricalMeasure(std::vector<Atom> atoms);
  static EmpiricalMeasure uniform(const std::vector<double>& locations);

  const std::vector<Atom>& atoms() const { return atoms_; }

 private:
  std::vector<Atom> atoms_;
};

/// Discrete steady state sum rho_i delta_{y_i} with w_bar y_i + b_bar a zero of sigma.
struct SteadyStateSpec {
  double w_bar;
  double b_bar;
  std::vector<double> zeros;
  std::vector<double> support;
  std::vector<double> masses;
};

namespace measures {

/// W1 as the L1 distance between cumulative distribution functions, integrated exactly on the
/// merged breakpoint set. Both arguments must carry unit mass.
double wasserstein1(const DensityField& mu, const DensityField& nu);
double wasserstein1(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);
double wasserstein1(const DensityField& mu, const EmpiricalMeasure& nu);
double wasserstein1(const EmpiricalMeasure& mu, const DensityField& nu);

/// k-th raw moment: midpoint rule on cell averages, weighted sum on atoms.
double moment(const DensityField& m, int k);
double moment(const EmpiricalMeasure& m, int k);

/// Points y with sigma(w_bar y + b_bar) = 0, sorted. GCU needs a domain because its zero set is
/// infinite; for the other activations the domain, when given, filters the result.
std::vector<double> steady_state_support(double w_bar, double b_bar, const Activation& a,
                                         std::optional<std::array<double, 2>> domain = {});

/// Validates masses and assembles the steady state.
SteadyStateSpec make_steady_state(double w_bar, double b_bar, const Activation& a,
                                  std::vector<double> masses,
                                  std::optional<std::array<double, 2>> domain = {});

struct Histogram {
  DensityField field;
  std::size_t outside = 0;  ///< particles that fell outside [a, b]
};

/// Unit-mass histogram of one-dimensional particle states.
Histogram particles_to_density(const ParticleEnsemble& ens, const Grid1D& grid);

}  // namespace measures
}  // namespace mfrn
