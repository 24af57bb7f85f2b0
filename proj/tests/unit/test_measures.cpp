#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mfrn/measures.hpp"

using namespace mfrn;

namespace {

constexpr double kPi = std::numbers::pi;

DensityField random_density(const Grid1D& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(g.n_cells()));
  for (auto& x : v) x = u(rng) < 0.3 ? 0.0 : u(rng);
  double m = 0.0;
  for (double x : v) m += x * g.dx();
  for (auto& x : v) x /= m;
  return DensityField(g, v);
}

/// Riemann sum of |F - G| on a fine uniform sampling of the piecewise-linear CDFs.
double cdf_oracle(const DensityField& f, const DensityField& h) {
  const int fine = 200;
  double total = 0.0, cf = 0.0, ch = 0.0;
  const double dx = f.grid.dx(), step = dx / fine;
  for (std::size_t j = 0; j < f.values.size(); ++j) {
    for (int s = 0; s < fine; ++s) {
      const double frac = (s + 0.5) / fine;
      total += std::abs((cf + frac * f.values[j] * dx) - (ch + frac * h.values[j] * dx)) * step;
    }
    cf += f.values[j] * dx;
    ch += h.values[j] * dx;
  }
  return total;
}

/// Sorted-sample matching for equal-size uniform empirical measures.
double quantile_oracle(std::vector<double> x, std::vector<double> y) {
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
  return s / static_cast<double>(x.size());
}

}  // namespace

TEST_CASE("wasserstein-1 examples") {
  const Grid1D g(-2.0, 3.0, 200);
  auto box = [](double lo) {
    return [lo](double x) { return (x >= lo && x <= lo + 1.0) ? 1.0 : 0.0; };
  };
  const auto f = fvm::project_initial(box(-0.5), g);
  const auto h = fvm::project_initial(box(0.5), g);
  CHECK(measures::wasserstein1(f, f) == 0.0);
  CHECK(measures::wasserstein1(f, h) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(measures::wasserstein1(h, f) == measures::wasserstein1(f, h));

  const auto a = EmpiricalMeasure::uniform({0.3});
  const auto b = EmpiricalMeasure::uniform({-1.2});
  CHECK(measures::wasserstein1(a, b) == doctest::Approx(1.5).epsilon(1e-15));

  // Uniform density on [0, 1] against a point mass at its centre.
  const Grid1D unit(0.0, 1.0, 10);
  const DensityField flat(unit, std::vector<double>(10, 1.0));
  CHECK(measures::wasserstein1(flat, EmpiricalMeasure::uniform({0.5})) ==
        doctest::Approx(0.25).epsilon(1e-14));
  CHECK(measures::wasserstein1(EmpiricalMeasure::uniform({0.0}), flat) ==
        doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("wasserstein-1 agrees with independent oracles") {
  std::mt19937_64 rng(3);
  const Grid1D g(-1.0, 2.0, 30);
  for (int i = 0; i < 20; ++i) {
    const auto f = random_density(g, rng), h = random_density(g, rng);
    CHECK(measures::wasserstein1(f, h) == doctest::Approx(cdf_oracle(f, h)).epsilon(1e-5));
  }
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> x(57), y(57);
    for (auto& v : x) v = n(rng);
    for (auto& v : y) v = 0.5 + 2.0 * n(rng);
    CHECK(measures::wasserstein1(EmpiricalMeasure::uniform(x), EmpiricalMeasure::uniform(y)) ==
          doctest::Approx(quantile_oracle(x, y)).epsilon(1e-12));
  }
}

TEST_CASE("wasserstein-1 triangle inequality") {
  std::mt19937_64 rng(41);
  const Grid1D g(-2.0, 3.0, 64);
  for (int i = 0; i < 200; ++i) {
    const auto a = random_density(g, rng), b = random_density(g, rng), c = random_density(g, rng);
    CHECK(measures::wasserstein1(a, c) <=
          measures::wasserstein1(a, b) + measures::wasserstein1(b, c) + 1e-10);
  }
  std::uniform_real_distribution<double> u(-2.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> x(9), y(4);
    for (auto& v : x) v = u(rng);
    for (auto& v : y) v = u(rng);
    const auto mx = EmpiricalMeasure::uniform(x), my = EmpiricalMeasure::uniform(y);
    const auto d = random_density(g, rng);
    CHECK(measures::wasserstein1(mx, my) <=
          measures::wasserstein1(mx, d) + measures::wasserstein1(d, my) + 1e-10);
  }
}

TEST_CASE("wasserstein-1 rejects unnormalised input") {
  const Grid1D g(0.0, 1.0, 10);
  const DensityField half(g, std::vector<double>(10, 0.5));
  const DensityField one(g, std::vector<double>(10, 1.0));
  CHECK_THROWS_AS(measures::wasserstein1(half, one), DomainError);
  CHECK_THROWS_AS(EmpiricalMeasure({{0.0, 0.5}, {1.0, 0.4}}), DomainError);
  CHECK_THROWS_AS(EmpiricalMeasure({{0.0, -0.5}, {1.0, 1.5}}), DomainError);
}

TEST_CASE("moments") {
  const Grid1D g(-2.0, 3.0, 1000);
  SUBCASE("normalised measures have unit zeroth moment") {
    const auto f = fvm::project_initial([](double x) { return std::exp(-x * x); }, g);
    CHECK(measures::moment(f, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(measures::moment(EmpiricalMeasure({{0.1, 0.25}, {4.0, 0.75}}), 0) == 1.0);
  }
  SUBCASE("beta(2, 5) mean") {
    auto beta = [](double x) { return (x > 0 && x < 1) ? 30 * x * std::pow(1 - x, 4) : 0.0; };
    const auto f = fvm::project_initial(beta, g);
    CHECK(std::abs(measures::moment(f, 1) - 2.0 / 7.0) < 1e-5);
  }
  SUBCASE("gaussian second moment") {
    auto gauss = [](double x) { return std::exp(-0.5 * (x - 1) * (x - 1) / 0.01); };
    const auto f = fvm::project_initial(gauss, g);
    CHECK(std::abs(measures::moment(f, 2) - 1.01) < 1e-5);
  }
  SUBCASE("atoms") {
    const EmpiricalMeasure m({{-1.0, 0.5}, {3.0, 0.5}});
    CHECK(measures::moment(m, 1) == 1.0);
    CHECK(measures::moment(m, 2) == 5.0);
    CHECK_THROWS_AS(measures::moment(m, -1), DomainError);
  }
}

TEST_CASE("steady-state support") {
  CHECK(measures::steady_state_support(1.0, 0.0, Activation(ActivationKind::Identity)) ==
        std::vector<double>{0.0});
  CHECK(measures::steady_state_support(2.0, 1.0, Activation(ActivationKind::Tanh)) ==
        std::vector<double>{-0.5});
  CHECK(measures::steady_state_support(1.0, 0.3, Activation(ActivationKind::Sigmoid)).empty());

  const auto gcu = measures::steady_state_support(1.0, 0.0, Activation(ActivationKind::GCU),
                                                  std::array<double, 2>{-2.0, 3.0});
  // Zeros of x cos x are 0 and pi/2 + k pi; 3 pi / 2 lies beyond 3.
  REQUIRE(gcu.size() == 3);
  CHECK(gcu[0] == doctest::Approx(-kPi / 2));
  CHECK(gcu[1] == 0.0);
  CHECK(gcu[2] == doctest::Approx(kPi / 2));

  CHECK_THROWS_AS(measures::steady_state_support(0.0, 1.0, Activation()), DomainError);
  CHECK_THROWS_AS(measures::steady_state_support(1.0, 0.0, Activation(ActivationKind::GCU)),
                  DomainError);

  SUBCASE("returned points are fixed points") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 200; ++i) {
      double w = u(rng);
      if (std::abs(w) < 1e-3) w = 1.0;
      const double b = u(rng);
      for (auto kind : {ActivationKind::Identity, ActivationKind::Tanh, ActivationKind::GCU}) {
        const Activation a(kind);
        for (double y : measures::steady_state_support(w, b, a, std::array<double, 2>{-5.0, 5.0}))
          CHECK(std::abs(a.value(w * y + b)) <= 1e-10);
      }
    }
  }

  SUBCASE("masses are validated") {
    const auto s = measures::make_steady_state(1.0, 0.0, Activation(ActivationKind::GCU),
                                               {0.2, 0.5, 0.3}, std::array<double, 2>{-2.0, 3.0});
    REQUIRE(s.zeros.size() == 3);
    for (std::size_t i = 0; i < 3; ++i)
      CHECK(std::abs(s.w_bar * s.support[i] + s.b_bar - s.zeros[i]) <= 1e-10);
    CHECK_THROWS_AS(measures::make_steady_state(1.0, 0.0, Activation(), {0.5}), DomainError);
    CHECK_THROWS_AS(measures::make_steady_state(1.0, 0.0, Activation(), {0.5, 0.5}), DomainError);
  }
}

TEST_CASE("particles to density") {
  const Grid1D g(-2.0, 3.0, 200);
  SUBCASE("single cell") {
    const ParticleEnsemble e(1, {0.01, 0.011, 0.02}, {0.0, 0.0, 0.0});
    const auto h = measures::particles_to_density(e, g);
    CHECK(h.outside == 0);
    int nonzero = 0;
    for (double v : h.field.values) {
      if (v != 0.0) {
        ++nonzero;
        CHECK(v == doctest::Approx(1.0 / g.dx()));
      }
    }
    CHECK(nonzero == 1);
  }
  SUBCASE("particles outside are counted and the rest renormalised") {
    const ParticleEnsemble e(1, {-5.0, 0.0, 1.0, 7.0}, {0.0, 0.0, 0.0, 0.0});
    const auto h = measures::particles_to_density(e, g);
    CHECK(h.outside == 2);
    CHECK(h.field.mass() == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("uniform samples approach the uniform density") {
    const Grid1D unit(-0.5, 0.5, 1000);
    const DensityField exact(unit, std::vector<double>(1000, 1.0));
    std::vector<double> mean_w1;
    for (std::size_t m : {100u, 1000u, 10000u, 100000u}) {
      double sum = 0.0;
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-0.5, 0.5);
        std::vector<double> x(m);
        for (auto& v : x) v = u(rng);
        const auto h = measures::particles_to_density(
            ParticleEnsemble(1, x, std::vector<double>(m, 0.0)), unit);
        CHECK(h.outside == 0);
        sum += measures::wasserstein1(h.field, exact);
      }
      mean_w1.push_back(sum / 5);
    }
    for (std::size_t i = 1; i < mean_w1.size(); ++i) CHECK(mean_w1[i] < mean_w1[i - 1]);
    CHECK(mean_w1.back() < 3e-3);
  }
  CHECK_THROWS_AS(measures::particles_to_density(ParticleEnsemble(2, {0, 0}, {0, 0}), g),
                  DomainError);
}
