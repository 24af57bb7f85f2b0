#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "mfrn/core.hpp"

namespace mfrn {

/// M particles in R^d with their targets; row-major M x d storage.
class ParticleEnsemble {
 public:
  ParticleEnsemble(std::size_t dimension, std::vector<double> states, std::vector<double> targets,
                   double time = 0.0);

  std::size_t size() const { return states_.size() / dimension_; }
  std::size_t dimension() const { return dimension_; }
  double time() const { return time_; }

  std::span<const double> state(std::size_t i) const {
    return {states_.data() + i * dimension_, dimension_};
  }
  std::span<double> state(std::size_t i) { return {states_.data() + i * dimension_, dimension_}; }
  std::span<const double> target(std::size_t i) const {
    return {targets_.data() + i * dimension_, dimension_};
  }

  const std::vector<double>& states() const { return states_; }
  const std::vector<double>& targets() const { return targets_; }

  ParticleEnsemble with_states(std::vector<double> states, double time) const;

 private:
  std::size_t dimension_;
  std::vector<double> states_;
  std::vector<double> targets_;
  double time_;
};

/// Discrete residual network; the skip matrix is the identity.
struct ResNetConfig {
  int n_layers = 0;
  double dt = 0.1;
  Activation activation{};
};

namespace particle {

enum class Integrator { Euler, RK4 };

/// L+1 updates x <- x + dt * sigma(w(k dt) x + b(k dt)), k = 0..L, applied componentwise.
std::vector<double> resnet_forward(std::span<const double> x0, const ControlPath& c,
                                   const ResNetConfig& cfg);

/// Integrates dx/dt = sigma(w(t) x + b(t)) for every particle up to grid.t_final().
/// Particles are independent, so the result does not depend on `threads`.
ParticleEnsemble ode_integrate(const ParticleEnsemble& ens, const ControlPath& c,
                               const Activation& a, const TimeGrid& grid, Integrator method,
                               int threads = 1);

/// (1/M) sum |x_i - y_i|^2
double empirical_loss(const ParticleEnsemble& ens);

/// Columns: index, x_1..x_d, y_1..y_d.
void write_csv(const std::filesystem::path& path, const ParticleEnsemble& ens);
ParticleEnsemble read_csv(const std::filesystem::path& path);

}  // namespace particle
}  // namespace mfrn
