#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mfrn/core.hpp"
#include "mfrn/fvm.hpp"
#include "mfrn/optim.hpp"

namespace mfrn {

/// Analytic density on the line.
///
/// Kinds and their parameters:
///   indicator  lo, hi            normalised indicator of [lo, hi]
///   gaussian   mu, s
///   beta       a1, a2            Beta(a1, a2) on [0, 1]
/// Target-only kinds, defined relative to the initial density f0:
///   shift      beta              f0(x - beta)
///   scale      alpha, center     f0(x e^alpha + (1 - e^alpha) center) e^alpha
///   transport                    numerical f_T of f0 under the scenario's exact controls
struct DensitySpec {
  std::string kind;
  std::map<std::string, double> params;

  double param(const std::string& key) const;
  bool relative() const { return kind == "shift" || kind == "scale" || kind == "transport"; }

  bool operator==(const DensitySpec&) const = default;
};

enum class InitialGuess { Zero, Linear };

/// A reproducible experiment: densities, activation, horizon and solver settings.
struct Scenario {
  std::string name;  ///< test1, test2, test3, convergence, shift_control, scale_control
  DensitySpec f0;
  DensitySpec g;
  Activation activation{};
  double t_final = 1.0;
  double dt = 1e-2;
  InitialGuess initial_guess = InitialGuess::Zero;
  /// Known controls: generate the Test 3 target, drive the convergence study, or set the
  /// controllability checks.
  std::optional<ControlPath> exact_controls;
  RunConfig config;
  std::uint64_t seed = 0;
  int n_seeds = 1;
  std::vector<int> m_list;  ///< particle counts of the convergence study

  bool operator==(const Scenario&) const = default;
};

/// Fields and target assembled from a scenario on its grid.
struct Problem {
  Grid1D grid;
  TimeGrid time;
  DensityField f0;
  DensityField g;
  TargetMeasure target;
  ControlPath initial_controls;
};

namespace scenarios {

inline constexpr const char* kNames[] = {"test1",       "test2",        "test3",
                                         "convergence", "shift_control", "scale_control"};

/// Density value at x. Relative kinds other than transport need `base` (the f0 spec).
double evaluate(const DensitySpec& spec, double x, const DensitySpec* base = nullptr);

Scenario build_test1(const Activation& a = Activation::from_name("identity"));
Scenario build_test2();
Scenario build_test3(InitialGuess guess = InitialGuess::Zero);
/// Fixed smooth controls and a smooth f0; requires M_list strictly increasing.
Scenario build_convergence_study(std::vector<int> m_list, std::uint64_t seed);
Scenario build_shift_control(double beta = 1.0, const Activation& a = Activation::from_name("identity"));
Scenario build_scale_control(double alpha = 0.25);

/// Throws DomainError for an inconsistent scenario.
void validate(const Scenario& s);

Problem materialize(const Scenario& s);

std::string to_json(const Scenario& s);
/// Parses and validates; ConfigError carries the source line of the offending key.
Scenario from_json(const std::string& text);
Scenario load(const std::filesystem::path& path);
void save(const std::filesystem::path& path, const Scenario& s);

/// Point of sigma^{-1}(v); InfeasibleError when v is outside the image of sigma.
double invert_activation(const Activation& a, double v);

/// w = 0 and constant b0 with sigma(b0) = beta / T moves the Test 1 indicator by beta.
/// Returns W1(f_T, f0(. - beta)).
double verify_controllability_shift(double beta, const Activation& a, double t_final,
                                    const RunConfig& cfg);

/// Identity activation, b(t) = t^2 + 1 on [0, T] with T^3/3 + T = beta, compared with the
/// constant control b = beta / T on the same horizon. Returns W1 between the two terminal
/// densities.
double verify_shift_nonuniqueness(double beta, const RunConfig& cfg);

/// Identity activation with w = -alpha / T and b = -w m0: the linear flow scales f0 about its
/// mean. Returns W1(f_T, g) for the Test 2 densities.
double verify_controllability_scale(double alpha, double t_final, const RunConfig& cfg);

/// Inverse-CDF samples of a piecewise-constant density.
std::vector<double> sample_density(const DensityField& f, std::size_t m, std::uint64_t seed);

struct ConvergencePoint {
  int m;
  std::vector<double> w1_per_seed;
  double mean_w1;
};

struct ConvergenceReport {
  std::vector<ConvergencePoint> points;
  /// Least-squares slope of log(mean W1) against log(M).
  double slope;
  bool monotone;
};

/// For each M and seed: sample f0, integrate the particles with RK4, histogram at T and
/// measure W1 against the PDE solution f_T.
ConvergenceReport run_convergence_study(const Scenario& s, int threads = 1);

}  // namespace scenarios
}  // namespace mfrn
