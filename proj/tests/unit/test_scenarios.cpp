#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mfrn/measures.hpp"
#include "mfrn/scenarios.hpp"

using namespace mfrn;
namespace fs = std::filesystem;

namespace {

double variance(const DensityField& f) {
  const double m = measures::moment(f, 1);
  return measures::moment(f, 2) - m * m;
}

/// Line (1-based) of the first line in `text` containing `needle`.
int line_containing(const std::string& text, const std::string& needle) {
  std::istringstream in(text);
  std::string line;
  for (int n = 1; std::getline(in, line); ++n)
    if (line.find(needle) != std::string::npos) return n;
  return 0;
}

std::string replace_once(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

}  // namespace

TEST_CASE("test1 builder") {
  const Scenario s = scenarios::build_test1();
  CHECK(s.config.n_cells == 200);
  CHECK(s.config.domain == std::array<double, 2>{-2.0, 3.0});
  CHECK(s.dt == 1e-2);
  CHECK(s.config.gamma_w == 1e-3);
  CHECK(s.config.gamma_b == 1e-3);
  CHECK(s.config.tol == 1e-4);
  CHECK(s.config.max_armijo == 10);
  const Problem p = scenarios::materialize(s);
  CHECK(p.initial_controls.admissible());
  CHECK(p.initial_controls.sup_norm() == 0.0);
  CHECK(measures::moment(p.g, 1) == doctest::Approx(measures::moment(p.f0, 1) + 1.0).epsilon(1e-12));
  CHECK(measures::wasserstein1(p.f0, p.g) == doctest::Approx(1.0).epsilon(1e-12));

  for (const char* name : {"identity", "tanh", "sigmoid"})
    CHECK(scenarios::build_test1(Activation::from_name(name)).activation.name() == std::string(name));
  CHECK_THROWS_AS(scenarios::build_test1(Activation::from_name("relu")), DomainError);
}

TEST_CASE("test2 builder") {
  const Scenario s = scenarios::build_test2();
  CHECK(s.config.n_cells == 400);
  CHECK(s.activation.kind() == ActivationKind::Identity);
  const Problem p = scenarios::materialize(s);
  CHECK(std::abs(measures::moment(p.f0, 1) - 1.0) < 1e-10);
  CHECK(std::abs(measures::moment(p.g, 1) - 1.0) < 1e-10);
  // Cell averaging adds dx^2 / 12 to the variance of a smooth density.
  const double dx = p.grid.dx();
  CHECK(std::sqrt(variance(p.g) - dx * dx / 12) ==
        doctest::Approx(0.1 * std::exp(-0.25)).epsilon(1e-4));
  CHECK(std::sqrt(variance(p.g)) == doctest::Approx(0.0779).epsilon(1e-2));

  Scenario still = s;
  still.g.params["alpha"] = 0.0;
  const Problem q = scenarios::materialize(still);
  for (std::size_t j = 0; j < q.g.values.size(); ++j)
    CHECK(q.g.values[j] == doctest::Approx(q.f0.values[j]).epsilon(1e-13));
}

TEST_CASE("test3 builder") {
  const Scenario s = scenarios::build_test3();
  CHECK(s.config.n_cells == 400);
  CHECK(s.config.gamma_w == 1.0);
  CHECK(s.config.gamma_b == 1e-4);
  CHECK(s.activation.kind() == ActivationKind::Sigmoid);
  REQUIRE(s.exact_controls);
  CHECK(s.exact_controls->w().front() == 0.0);
  CHECK(s.exact_controls->b().front() == 0.0);
  CHECK(s.exact_controls->w().back() == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-14));
  CHECK(s.exact_controls->b().back() == doctest::Approx(-4.0).epsilon(1e-14));
  const Problem p = scenarios::materialize(s);
  CHECK(std::abs(measures::moment(p.f0, 1) - 2.0 / 7.0) < 1e-5);
  // The target is the forward solution under the manufactured controls.
  const auto fT = optim::forward_solve(*s.exact_controls, p.f0, s.activation, s.config).back();
  CHECK(fT.values == p.g.values);

  const Problem lin = scenarios::materialize(scenarios::build_test3(InitialGuess::Linear));
  CHECK(lin.initial_controls.admissible());
  CHECK(lin.initial_controls.w().back() == doctest::Approx(1.0));
  CHECK(lin.initial_controls.b().back() == doctest::Approx(1.0));
}

TEST_CASE("every builder round-trips through the config format") {
  const std::vector<Scenario> all{scenarios::build_test1(),
                                  scenarios::build_test1(Activation::from_name("sigmoid")),
                                  scenarios::build_test2(),
                                  scenarios::build_test3(),
                                  scenarios::build_test3(InitialGuess::Linear),
                                  scenarios::build_convergence_study({100, 1000, 10000}, 17),
                                  scenarios::build_shift_control(1.0),
                                  scenarios::build_shift_control(0.5, Activation::from_name("tanh")),
                                  scenarios::build_scale_control(0.25)};
  for (const auto& s : all) {
    const std::string text = scenarios::to_json(s);
    const Scenario back = scenarios::from_json(text);
    CHECK(back == s);
    CHECK(scenarios::to_json(back) == text);
  }
}

TEST_CASE("config errors carry the offending line") {
  const std::string text = scenarios::to_json(scenarios::build_test1());
  SUBCASE("n_cells = 0") {
    const std::string bad = replace_once(text, "\"n_cells\": 200", "\"n_cells\": 0");
    try {
      (void)scenarios::from_json(bad);
      FAIL("accepted n_cells = 0");
    } catch (const ConfigError& e) {
      CHECK(e.line() == line_containing(bad, "\"n_cells\""));
      CHECK(std::string(e.what()).find("n_cells") != std::string::npos);
    }
  }
  SUBCASE("unknown key") {
    const std::string bad = replace_once(text, "\"seed\":", "\"sede\": 1,\n  \"seed\":");
    try {
      (void)scenarios::from_json(bad);
      FAIL("accepted an unknown key");
    } catch (const ConfigError& e) {
      CHECK(e.line() == line_containing(bad, "\"sede\""));
    }
  }
  SUBCASE("wrong type") {
    const std::string bad = replace_once(text, "\"tol\": 0.0001", "\"tol\": \"small\"");
    try {
      (void)scenarios::from_json(bad);
      FAIL("accepted a string tolerance");
    } catch (const ConfigError& e) {
      CHECK(e.line() == line_containing(bad, "\"tol\""));
    }
  }
  SUBCASE("malformed json") {
    const std::string bad = replace_once(text, "\"dt\": 0.01,", "\"dt\": 0.01,,");
    try {
      (void)scenarios::from_json(bad);
      FAIL("accepted malformed JSON");
    } catch (const ConfigError& e) {
      CHECK(e.line() == line_containing(bad, ",,"));
    }
  }
  SUBCASE("missing seed") {
    CHECK_THROWS_AS(scenarios::from_json(replace_once(text, "\"seed\": 0,", "")), ConfigError);
  }
  SUBCASE("unknown activation") {
    CHECK_THROWS_AS(scenarios::from_json(replace_once(text, "\"identity\"", "\"swish\"")),
                    ConfigError);
  }
}

TEST_CASE("shipped scenario files load") {
  int count = 0;
  for (const auto& entry : fs::directory_iterator(MFRN_SCENARIO_DIR)) {
    if (entry.path().extension() != ".json") continue;
    CAPTURE(entry.path().string());
    const Scenario s = scenarios::load(entry.path());
    CHECK_NOTHROW(scenarios::validate(s));
    ++count;
  }
  CHECK(count >= 9);
  const Scenario t1 = scenarios::load(fs::path(MFRN_SCENARIO_DIR) / "test1_identity.json");
  CHECK(t1.name == "test1");
  CHECK(t1.f0 == scenarios::build_test1().f0);
  CHECK(t1.g == scenarios::build_test1().g);
}

TEST_CASE("shift controllability") {
  RunConfig cfg = scenarios::build_test1().config;
  const double dx = (cfg.domain[1] - cfg.domain[0]) / cfg.n_cells;
  CHECK(scenarios::verify_controllability_shift(1.0, Activation::from_name("identity"), 1.0, cfg) <=
        2 * dx);
  CHECK(scenarios::verify_controllability_shift(0.5, Activation::from_name("tanh"), 1.0, cfg) <=
        2 * dx);
  CHECK(scenarios::verify_controllability_shift(0.5, Activation::from_name("sigmoid"), 1.0, cfg) <=
        2 * dx);
  CHECK_THROWS_AS(
      scenarios::verify_controllability_shift(2.0, Activation::from_name("sigmoid"), 1.0, cfg),
      InfeasibleError);
  CHECK_THROWS_AS(scenarios::invert_activation(Activation::from_name("tanh"), -1.0),
                  InfeasibleError);
  CHECK(scenarios::invert_activation(Activation::from_name("sigmoid"), 0.5) == 0.0);

  // b = t^2 + 1 over the horizon with T^3 / 3 + T = 1 moves the mass as far as the constant.
  CHECK(scenarios::verify_shift_nonuniqueness(1.0, cfg) <= dx);
}

TEST_CASE("scale controllability") {
  const RunConfig cfg = scenarios::build_test2().config;
  const double dx = (cfg.domain[1] - cfg.domain[0]) / cfg.n_cells;
  CHECK(scenarios::verify_controllability_scale(0.25, 1.0, cfg) <= dx);
  CHECK(scenarios::verify_controllability_scale(0.25, 0.5, cfg) <= dx);
}

TEST_CASE("density sampling") {
  const Grid1D g(0.0, 1.0, 4);
  const DensityField f(g, {0.0, 2.0, 2.0, 0.0});
  const auto a = scenarios::sample_density(f, 1000, 5);
  CHECK(a == scenarios::sample_density(f, 1000, 5));
  CHECK(a != scenarios::sample_density(f, 1000, 6));
  for (double x : a) {
    CHECK(x >= 0.25);
    CHECK(x <= 0.75);
  }
  CHECK_THROWS_AS(scenarios::sample_density(DensityField(g, {1.0, -1.0, 1.0, 3.0}), 3, 0),
                  DomainError);
}

TEST_CASE("convergence study") {
  Scenario s = scenarios::build_convergence_study({10, 10000}, 3);
  SUBCASE("more particles give a smaller distance") {
    const auto r = scenarios::run_convergence_study(s);
    REQUIRE(r.points.size() == 2);
    CHECK(r.points[0].w1_per_seed.size() == 5);
    CHECK(r.points[1].mean_w1 < r.points[0].mean_w1);
    CHECK(r.monotone);
    CHECK(r.slope < 0.0);
    const auto again = scenarios::run_convergence_study(s);
    CHECK(again.points[0].w1_per_seed == r.points[0].w1_per_seed);
    CHECK(again.points[1].w1_per_seed == r.points[1].w1_per_seed);
  }
  SUBCASE("zero controls leave only the sampling error") {
    s.exact_controls = ControlPath::zero(s.exact_controls->grid());
    s.m_list = {1000};
    s.n_seeds = 2;
    const auto r = scenarios::run_convergence_study(s);
    const Problem p = scenarios::materialize(s);
    for (int k = 0; k < 2; ++k) {
      const auto x = scenarios::sample_density(p.f0, 1000, s.seed + static_cast<std::uint64_t>(k));
      const auto h = measures::particles_to_density(ParticleEnsemble(1, x, x), p.grid);
      CHECK(r.points[0].w1_per_seed[static_cast<std::size_t>(k)] ==
            doctest::Approx(measures::wasserstein1(h.field, p.f0)).epsilon(1e-9));
    }
  }
  CHECK_THROWS_AS(scenarios::build_convergence_study({100, 10}, 0), ConfigError);
}
