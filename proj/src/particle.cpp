#include "mfrn/particle.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "mfrn/csv.hpp"

namespace mfrn {

ParticleEnsemble::ParticleEnsemble(std::size_t dimension, std::vector<double> states,
                                   std::vector<double> targets, double time)
    : dimension_(dimension), states_(std::move(states)), targets_(std::move(targets)), time_(time) {
  if (dimension_ == 0) throw DomainError("particle dimension must be positive");
  if (states_.empty() || states_.size() % dimension_ != 0)
    throw DomainError("particle states must form a nonempty M x d array");
  if (targets_.size() != states_.size())
    throw DomainError("particle states and targets must have identical shape");
}

ParticleEnsemble ParticleEnsemble::with_states(std::vector<double> states, double time) const {
  return ParticleEnsemble(dimension_, std::move(states), targets_, time);
}

namespace particle {

std::vector<double> resnet_forward(std::span<const double> x0, const ControlPath& c,
                                   const ResNetConfig& cfg) {
  if (cfg.n_layers < 0) throw DomainError("n_layers must be nonnegative");
  if (!(cfg.dt > 0.0)) throw DomainError("layer step must be positive");
  std::vector<double> x(x0.begin(), x0.end());
  for (int layer = 0; layer <= cfg.n_layers; ++layer) {
    const auto [w, b] = c(layer * cfg.dt);
    for (double& xi : x) xi = xi + cfg.dt * cfg.activation.value(w * xi + b);
  }
  return x;
}

namespace {

void euler_particle(std::span<double> x, const ControlPath& c, const Activation& a,
                    const TimeGrid& grid) {
  const double dt = grid.dt();
  for (int k = 0; k < grid.n_steps(); ++k) {
    const auto [w, b] = c(k * dt);
    for (double& xi : x) xi = xi + dt * a.value(w * xi + b);
  }
}

void rk4_particle(std::span<double> x, const ControlPath& c, const Activation& a,
                  const TimeGrid& grid) {
  const double dt = grid.dt();
  const double T = grid.t_final();
  for (int k = 0; k < grid.n_steps(); ++k) {
    const double t = k * dt;
    const auto [w0, b0] = c(t);
    const auto [wh, bh] = c(t + 0.5 * dt);
    const auto [w1, b1] = c(std::min(t + dt, T));
    for (double& xi : x) {
      const double k1 = a.value(w0 * xi + b0);
      const double k2 = a.value(wh * (xi + 0.5 * dt * k1) + bh);
      const double k3 = a.value(wh * (xi + 0.5 * dt * k2) + bh);
      const double k4 = a.value(w1 * (xi + dt * k3) + b1);
      xi += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  }
}

}  // namespace

ParticleEnsemble ode_integrate(const ParticleEnsemble& ens, const ControlPath& c,
                               const Activation& a, const TimeGrid& grid, Integrator method,
                               int threads) {
  if (std::abs(grid.t_final() - c.grid().t_final()) > 1e-12 * grid.t_final())
    throw DomainError("integration horizon differs from the control horizon");
  std::vector<double> states = ens.states();
  const std::size_t m = ens.size();
  const std::size_t d = ens.dimension();
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      std::span<double> x(states.data() + i * d, d);
      if (method == Integrator::Euler) euler_particle(x, c, a, grid);
      else rk4_particle(x, c, a, grid);
    }
  };
  const auto n_threads = static_cast<std::size_t>(std::clamp<std::size_t>(
      static_cast<std::size_t>(std::max(threads, 1)), 1, std::max<std::size_t>(m, 1)));
  if (n_threads == 1) {
    work(0, m);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (m + n_threads - 1) / n_threads;
    for (std::size_t t = 0; t < n_threads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(m, begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
  }
  return ens.with_states(std::move(states), grid.t_final());
}

double empirical_loss(const ParticleEnsemble& ens) {
  double sum = 0.0;
  const auto& x = ens.states();
  const auto& y = ens.targets();
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double diff = x[k] - y[k];
    sum += diff * diff;
  }
  return sum / static_cast<double>(ens.size());
}

void write_csv(const std::filesystem::path& path, const ParticleEnsemble& ens) {
  const std::size_t d = ens.dimension();
  std::vector<std::string> header{"index"};
  for (std::size_t j = 1; j <= d; ++j) header.push_back("x_" + std::to_string(j));
  for (std::size_t j = 1; j <= d; ++j) header.push_back("y_" + std::to_string(j));
  std::vector<std::vector<double>> rows;
  rows.reserve(ens.size());
  for (std::size_t i = 0; i < ens.size(); ++i) {
    std::vector<double> r{static_cast<double>(i)};
    for (double v : ens.state(i)) r.push_back(v);
    for (double v : ens.target(i)) r.push_back(v);
    rows.push_back(std::move(r));
  }
  csv::write(path, header, rows);
}

ParticleEnsemble read_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read(path);
  if (t.header.size() < 3 || (t.header.size() - 1) % 2 != 0)
    throw Error(path.string() + ": expected columns index, x_1..x_d, y_1..y_d");
  const std::size_t d = (t.header.size() - 1) / 2;
  std::vector<double> x, y;
  for (const auto& row : t.rows) {
    if (row.size() != t.header.size()) throw Error(path.string() + ": ragged row");
    for (std::size_t j = 0; j < d; ++j) x.push_back(std::stod(row[1 + j]));
    for (std::size_t j = 0; j < d; ++j) y.push_back(std::stod(row[1 + d + j]));
  }
  return ParticleEnsemble(d, std::move(x), std::move(y));
}

}  // namespace particle
}  // namespace mfrn
