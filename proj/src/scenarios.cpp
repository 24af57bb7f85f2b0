#include "mfrn/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mfrn/measures.hpp"
#include "mfrn/particle.hpp"

namespace mfrn {

using nlohmann::json;

double DensitySpec::param(const std::string& key) const {
  const auto it = params.find(key);
  if (it == params.end()) throw DomainError("density '" + kind + "' needs parameter '" + key + "'");
  return it->second;
}

namespace scenarios {

namespace {

const std::map<std::string, std::vector<std::string>>& density_kinds() {
  static const std::map<std::string, std::vector<std::string>> kinds = {
      {"indicator", {"lo", "hi"}}, {"gaussian", {"mu", "s"}},        {"beta", {"a1", "a2"}},
      {"shift", {"beta"}},         {"scale", {"alpha", "center"}}, {"transport", {}}};
  return kinds;
}

TimeGrid time_grid(const Scenario& s) { return TimeGrid::from_step(s.t_final, s.dt); }

Grid1D space_grid(const RunConfig& cfg) {
  return Grid1D(cfg.domain[0], cfg.domain[1], cfg.n_cells);
}

RunConfig standard_config(int n_cells) {
  RunConfig cfg;
  cfg.n_cells = n_cells;
  cfg.gamma_w = 1e-3;
  cfg.gamma_b = 1e-3;
  cfg.tol = 1e-4;
  cfg.max_armijo = 10;
  cfg.substeps = fvm::kAutoSubsteps;
  return cfg;
}

}  // namespace

double evaluate(const DensitySpec& spec, double x, const DensitySpec* base) {
  if (spec.kind == "indicator") {
    const double lo = spec.param("lo"), hi = spec.param("hi");
    return (x >= lo && x <= hi) ? 1.0 / (hi - lo) : 0.0;
  }
  if (spec.kind == "gaussian") {
    const double mu = spec.param("mu"), s = spec.param("s");
    const double z = (x - mu) / s;
    return std::exp(-0.5 * z * z) / (std::sqrt(2.0 * std::numbers::pi) * s);
  }
  if (spec.kind == "beta") {
    if (!(x > 0.0 && x < 1.0)) return 0.0;
    const double a1 = spec.param("a1"), a2 = spec.param("a2");
    return std::pow(x, a1 - 1.0) * std::pow(1.0 - x, a2 - 1.0) / std::beta(a1, a2);
  }
  if (spec.kind == "shift" || spec.kind == "scale") {
    if (base == nullptr || base->relative())
      throw DomainError("density '" + spec.kind + "' is defined relative to an absolute f0");
    if (spec.kind == "shift") return evaluate(*base, x - spec.param("beta"));
    const double e = std::exp(spec.param("alpha"));
    return evaluate(*base, x * e + (1.0 - e) * spec.param("center")) * e;
  }
  throw DomainError("density '" + spec.kind + "' has no pointwise formula");
}

Scenario build_test1(const Activation& a) {
  if (!(a.kind() == ActivationKind::Identity || a.kind() == ActivationKind::Tanh ||
        a.kind() == ActivationKind::Sigmoid))
    throw DomainError("test1 runs with identity, tanh or sigmoid");
  Scenario s;
  s.name = "test1";
  s.f0 = {"indicator", {{"lo", -0.5}, {"hi", 0.5}}};
  s.g = {"shift", {{"beta", 1.0}}};
  s.activation = a;
  s.config = standard_config(200);
  s.config.max_iterations = 10000;
  return s;
}

Scenario build_test2() {
  Scenario s;
  s.name = "test2";
  s.f0 = {"gaussian", {{"mu", 1.0}, {"s", 0.1}}};
  s.g = {"scale", {{"alpha", 0.25}, {"center", 1.0}}};
  s.activation = Activation::from_name("identity");
  s.config = standard_config(400);
  s.config.max_iterations = 10000;
  return s;
}

Scenario build_test3(InitialGuess guess) {
  Scenario s;
  s.name = "test3";
  s.f0 = {"beta", {{"a1", 2.0}, {"a2", 5.0}}};
  s.g = {"transport", {}};
  s.activation = Activation::from_name("sigmoid");
  s.initial_guess = guess;
  s.config = standard_config(400);
  s.config.gamma_w = 1.0;
  s.config.gamma_b = 1e-4;
  s.config.max_iterations = 10000;
  s.exact_controls = ControlPath::sample(
      time_grid(s), [](double t) { return std::exp(t) - 1.0; },
      [](double t) { return -5.0 * t * t + t; });
  return s;
}

Scenario build_convergence_study(std::vector<int> m_list, std::uint64_t seed) {
  Scenario s;
  s.name = "convergence";
  s.f0 = {"gaussian", {{"mu", 0.5}, {"s", 0.25}}};
  s.g = s.f0;
  s.activation = Activation::from_name("tanh");
  s.config = standard_config(1000);
  s.seed = seed;
  s.n_seeds = 5;
  s.m_list = std::move(m_list);
  s.exact_controls = ControlPath::sample(
      time_grid(s), [](double t) { return -0.5 * t; },
      [](double t) { return 0.5 * std::sin(std::numbers::pi * t); });
  validate(s);
  return s;
}

Scenario build_shift_control(double beta, const Activation& a) {
  Scenario s;
  s.name = "shift_control";
  s.f0 = {"indicator", {{"lo", -0.5}, {"hi", 0.5}}};
  s.g = {"shift", {{"beta", beta}}};
  s.activation = a;
  s.config = standard_config(200);
  const double b0 = invert_activation(a, beta / s.t_final);
  s.exact_controls = ControlPath::sample(
      time_grid(s), [](double) { return 0.0; }, [b0](double) { return b0; });
  return s;
}

Scenario build_scale_control(double alpha) {
  Scenario s;
  s.name = "scale_control";
  s.f0 = {"gaussian", {{"mu", 1.0}, {"s", 0.1}}};
  s.g = {"scale", {{"alpha", alpha}, {"center", 1.0}}};
  s.activation = Activation::from_name("identity");
  s.config = standard_config(400);
  const double w = -alpha / s.t_final;
  s.exact_controls = ControlPath::sample(
      time_grid(s), [w](double) { return w; }, [w](double) { return -w * 1.0; });
  return s;
}

void validate(const Scenario& s) {
  if (std::find_if(std::begin(kNames), std::end(kNames), [&](const char* n) { return s.name == n; }) ==
      std::end(kNames))
    throw ConfigError(0, "name '" + s.name + "' is not a known scenario", "name");
  s.config.validate();
  if (s.config.dimension != 1)
    throw ConfigError(0, "dimension must be 1 for the transport solver", "dimension");
  if (!(s.t_final > 0.0)) throw ConfigError(0, "t_final must be positive", "t_final");
  if (!(s.dt > 0.0)) throw ConfigError(0, "dt must be positive", "dt");
  try {
    (void)time_grid(s);
  } catch (const DomainError& e) {
    throw ConfigError(0, std::string("dt: ") + e.what(), "dt");
  }
  auto check_density = [&](const DensitySpec& d, const char* field, bool allow_relative) {
    const auto it = density_kinds().find(d.kind);
    if (it == density_kinds().end())
      throw ConfigError(0, std::string(field) + ": unknown density kind '" + d.kind + "'", field);
    if (d.relative() && !allow_relative)
      throw ConfigError(0, std::string(field) + ": '" + d.kind + "' needs an absolute density",
                        field);
    for (const auto& key : it->second)
      if (!d.params.contains(key))
        throw ConfigError(0, std::string(field) + ": missing parameter '" + key + "'", field);
    for (const auto& [key, v] : d.params) {
      if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
        throw ConfigError(0, std::string(field) + ": unexpected parameter '" + key + "'", key);
      if (!std::isfinite(v)) throw ConfigError(0, std::string(field) + ": non-finite " + key, key);
    }
    if (d.kind == "indicator" && !(d.param("hi") > d.param("lo")))
      throw ConfigError(0, std::string(field) + ": indicator needs lo < hi", "hi");
    if (d.kind == "gaussian" && !(d.param("s") > 0.0))
      throw ConfigError(0, std::string(field) + ": gaussian needs s > 0", "s");
    if (d.kind == "beta" && !(d.param("a1") > 0.0 && d.param("a2") > 0.0))
      throw ConfigError(0, std::string(field) + ": beta needs a1, a2 > 0", "a1");
  };
  check_density(s.f0, "f0", false);
  check_density(s.g, "g", true);
  if (s.exact_controls) {
    if (!(s.exact_controls->grid() == time_grid(s)))
      throw ConfigError(0, "exact_controls must have one value per time node", "exact_controls");
  } else if (s.g.kind == "transport" || s.name == "convergence" || s.name == "shift_control" ||
             s.name == "scale_control") {
    throw ConfigError(0, "scenario '" + s.name + "' needs exact_controls", "exact_controls");
  }
  if (s.n_seeds < 1) throw ConfigError(0, "n_seeds must be at least 1", "n_seeds");
  for (std::size_t i = 0; i < s.m_list.size(); ++i) {
    if (s.m_list[i] < 1) throw ConfigError(0, "m_list entries must be positive", "m_list");
    if (i > 0 && s.m_list[i] <= s.m_list[i - 1])
      throw ConfigError(0, "m_list must be strictly increasing", "m_list");
  }
  if (s.name == "convergence" && s.m_list.empty())
    throw ConfigError(0, "convergence needs a nonempty m_list", "m_list");
}

Problem materialize(const Scenario& s) {
  validate(s);
  const Grid1D grid = space_grid(s.config);
  const TimeGrid time = time_grid(s);
  auto project = [&](const std::function<double(double)>& fn, const char* what) {
    // Mass outside the domain would be silently dropped by the renormalisation.
    const double raw = fvm::project_function(fn, grid).mass();
    if (std::abs(raw - 1.0) > 1e-6) {
      throw DomainError(std::string(what) + " has mass " + std::to_string(raw) +
                        " on the domain; widen the domain");
    }
    return fvm::project_initial(fn, grid);
  };
  DensityField f0 = project([&](double x) { return evaluate(s.f0, x); }, "f0");
  std::optional<DensityField> g;
  if (s.g.kind == "transport") {
    g = optim::forward_solve(*s.exact_controls, f0, s.activation, s.config).back();
    g->time = 0.0;
  } else {
    g = project([&](double x) { return evaluate(s.g, x, &s.f0); }, "g");
  }
  ControlPath c0 = s.initial_guess == InitialGuess::Zero
                       ? ControlPath::zero(time)
                       : ControlPath::sample(time, [](double t) { return t; },
                                             [](double t) { return t; });
  TargetMeasure target = TargetMeasure::from_density(*g);
  return {grid, time, std::move(f0), std::move(*g), std::move(target), std::move(c0)};
}

// ---------------------------------------------------------------------------------------------
// Config files

namespace {

json density_to_json(const DensitySpec& d) {
  json j;
  j["kind"] = d.kind;
  for (const auto& [k, v] : d.params) j[k] = v;
  return j;
}

// Line of the first occurrence of "key" in the source, 0 if absent.
int line_of_key(const std::string& text, const std::string& key, std::size_t from = 0) {
  if (key.empty()) return 0;
  const auto pos = text.find("\"" + key + "\"", from);
  if (pos == std::string::npos) return 0;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n'));
}

int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

class Reader {
 public:
  explicit Reader(const std::string& text) : text_(text) {}

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError(line_of_key(text_, key), key + ": " + msg, key);
  }

  template <class T>
  T get(const json& obj, const std::string& key) const {
    if (!obj.contains(key)) fail(key, "missing required key");
    return as<T>(obj.at(key), key);
  }

  template <class T>
  T get_or(const json& obj, const std::string& key, T fallback) const {
    return obj.contains(key) ? as<T>(obj.at(key), key) : fallback;
  }

  template <class T>
  T as(const json& v, const std::string& key) const {
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) fail(key, "expected a number");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(key, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.get<long long>() < 0 && !v.is_number_unsigned()) fail(key, "must be nonnegative");
      } else {
        const auto x = v.get<long long>();
        if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max())
          fail(key, "out of range");
      }
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(key, "expected a string");
    }
    return v.get<T>();
  }

  void only(const json& obj, const std::string& where, std::initializer_list<const char*> keys) const {
    if (!obj.is_object()) fail(where, "expected an object");
    for (const auto& [k, v] : obj.items()) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* key) { return k == key; }))
        fail(k, "unknown key in " + where);
    }
  }

  DensitySpec density(const json& obj, const std::string& where) const {
    if (!obj.is_object()) fail(where, "expected an object");
    DensitySpec d;
    d.kind = get<std::string>(obj, "kind");
    for (const auto& [k, v] : obj.items()) {
      if (k == "kind") continue;
      d.params[k] = as<double>(v, k);
    }
    return d;
  }

  const std::string& text() const { return text_; }

 private:
  const std::string& text_;
};

}  // namespace

std::string to_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  j["activation"] = std::string(s.activation.name());
  j["t_final"] = s.t_final;
  j["dt"] = s.dt;
  j["initial_guess"] = s.initial_guess == InitialGuess::Zero ? "zero" : "linear";
  j["seed"] = s.seed;
  j["n_seeds"] = s.n_seeds;
  j["m_list"] = s.m_list;
  j["f0"] = density_to_json(s.f0);
  j["g"] = density_to_json(s.g);
  if (s.exact_controls) j["exact_controls"] = {{"w", s.exact_controls->w()}, {"b", s.exact_controls->b()}};
  const RunConfig& c = s.config;
  j["run"] = {{"gamma_w", c.gamma_w},       {"gamma_b", c.gamma_b},
              {"tol", c.tol},               {"max_armijo", c.max_armijo},
              {"cfl", c.cfl},               {"domain", {c.domain[0], c.domain[1]}},
              {"n_cells", c.n_cells},       {"dimension", c.dimension},
              {"max_iterations", c.max_iterations}, {"substeps", c.substeps}};
  return j.dump(2) + "\n";
}

Scenario from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0),
                      std::string("malformed JSON: ") + e.what());
  }
  const Reader r(text);
  r.only(j, "scenario",
         {"name", "activation", "t_final", "dt", "initial_guess", "seed", "n_seeds", "m_list", "f0",
          "g", "exact_controls", "run"});
  Scenario s;
  s.name = r.get<std::string>(j, "name");
  try {
    s.activation = Activation::from_name(r.get<std::string>(j, "activation"));
  } catch (const DomainError& e) {
    r.fail("activation", e.what());
  }
  s.t_final = r.get_or<double>(j, "t_final", s.t_final);
  s.dt = r.get_or<double>(j, "dt", s.dt);
  const auto guess = r.get_or<std::string>(j, "initial_guess", "zero");
  if (guess == "zero") s.initial_guess = InitialGuess::Zero;
  else if (guess == "linear") s.initial_guess = InitialGuess::Linear;
  else r.fail("initial_guess", "expected 'zero' or 'linear'");
  s.seed = r.get<std::uint64_t>(j, "seed");
  s.n_seeds = r.get_or<int>(j, "n_seeds", s.n_seeds);
  if (j.contains("m_list")) {
    if (!j["m_list"].is_array()) r.fail("m_list", "expected an array");
    for (const auto& v : j["m_list"]) s.m_list.push_back(r.as<int>(v, "m_list"));
  }
  if (!j.contains("f0")) r.fail("f0", "missing required key");
  if (!j.contains("g")) r.fail("g", "missing required key");
  s.f0 = r.density(j["f0"], "f0");
  s.g = r.density(j["g"], "g");
  if (j.contains("exact_controls")) {
    const json& ec = j["exact_controls"];
    r.only(ec, "exact_controls", {"w", "b"});
    auto series = [&](const char* key) {
      if (!ec.contains(key) || !ec[key].is_array()) r.fail(key, "expected an array of numbers");
      std::vector<double> v;
      for (const auto& x : ec[key]) v.push_back(r.as<double>(x, key));
      return v;
    };
    std::vector<double> w = series("w"), b = series("b");
    TimeGrid tg(1.0, 1);
    try {
      tg = TimeGrid::from_step(s.t_final, s.dt);
    } catch (const DomainError& e) {
      r.fail("dt", e.what());
    }
    if (w.size() != tg.n_nodes() || b.size() != tg.n_nodes())
      r.fail("exact_controls", "needs " + std::to_string(tg.n_nodes()) + " values for w and b");
    s.exact_controls = ControlPath(tg, std::move(w), std::move(b));
  }
  if (j.contains("run")) {
    const json& run = j["run"];
    r.only(run, "run",
           {"gamma_w", "gamma_b", "tol", "max_armijo", "cfl", "domain", "n_cells", "dimension",
            "max_iterations", "substeps"});
    RunConfig& c = s.config;
    c.gamma_w = r.get_or<double>(run, "gamma_w", c.gamma_w);
    c.gamma_b = r.get_or<double>(run, "gamma_b", c.gamma_b);
    c.tol = r.get_or<double>(run, "tol", c.tol);
    c.max_armijo = r.get_or<int>(run, "max_armijo", c.max_armijo);
    c.cfl = r.get_or<double>(run, "cfl", c.cfl);
    if (run.contains("domain")) {
      const json& d = run["domain"];
      if (!d.is_array() || d.size() != 2) r.fail("domain", "expected [a, b]");
      c.domain = {r.as<double>(d[0], "domain"), r.as<double>(d[1], "domain")};
    }
    c.n_cells = r.get_or<int>(run, "n_cells", c.n_cells);
    c.dimension = r.get_or<int>(run, "dimension", c.dimension);
    c.max_iterations = r.get_or<int>(run, "max_iterations", c.max_iterations);
    c.substeps = r.get_or<int>(run, "substeps", c.substeps);
  }
  try {
    validate(s);
  } catch (const ConfigError& e) {
    throw ConfigError(line_of_key(text, e.field()), e.detail(), e.field());
  }
  return s;
}

Scenario load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(0, "cannot open config file " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  try {
    return from_json(os.str());
  } catch (const ConfigError& e) {
    throw ConfigError(e.line(), path.string() + ": " + e.detail(), e.field());
  }
}

void save(const std::filesystem::path& path, const Scenario& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json(s);
}

// ---------------------------------------------------------------------------------------------
// Controllability checks

double invert_activation(const Activation& a, double v) {
  auto infeasible = [&](const char* image) {
    throw InfeasibleError("beta / T = " + std::to_string(v) + " lies outside the image " + image +
                          " of " + std::string(a.name()));
  };
  switch (a.kind()) {
    case ActivationKind::Identity: return v;
    case ActivationKind::ReLU:
      if (v < 0.0) infeasible("[0, inf)");
      return v;
    case ActivationKind::Tanh:
      if (!(std::abs(v) < 1.0)) infeasible("(-1, 1)");
      return std::atanh(v);
    case ActivationKind::Sigmoid:
      if (!(v > 0.0 && v < 1.0)) infeasible("(0, 1)");
      return std::log(v / (1.0 - v));
    case ActivationKind::GCU: break;
  }
  throw InfeasibleError("gcu is not invertible; pick b0 by hand");
}

namespace {

TimeGrid horizon_grid(double t_final) {
  return TimeGrid(t_final, std::max(1, static_cast<int>(std::lround(t_final / 1e-2))));
}

DensityField test1_initial(const Grid1D& grid) {
  const DensitySpec f0{"indicator", {{"lo", -0.5}, {"hi", 0.5}}};
  return fvm::project_initial([&](double x) { return evaluate(f0, x); }, grid);
}

}  // namespace

double verify_controllability_shift(double beta, const Activation& a, double t_final,
                                    const RunConfig& cfg) {
  if (!(t_final > 0.0)) throw DomainError("horizon must be positive");
  const double b0 = invert_activation(a, beta / t_final);
  const Grid1D grid = space_grid(cfg);
  const TimeGrid time = horizon_grid(t_final);
  const ControlPath c = ControlPath::sample(time, [](double) { return 0.0; }, [b0](double) { return b0; });
  const DensityField f0 = test1_initial(grid);
  const DensitySpec base{"indicator", {{"lo", -0.5}, {"hi", 0.5}}};
  const DensityField g = fvm::project_initial(
      [&](double x) { return evaluate(DensitySpec{"shift", {{"beta", beta}}}, x, &base); }, grid);
  return measures::wasserstein1(optim::forward_solve(c, f0, a, cfg).back(), g);
}

double verify_shift_nonuniqueness(double beta, const RunConfig& cfg) {
  if (!(beta > 0.0)) throw DomainError("beta must be positive");
  // T^3/3 + T is increasing; bracket and bisect.
  double lo = 0.0, hi = std::max(1.0, beta);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mid * mid * mid / 3.0 + mid < beta ? lo : hi) = mid;
  }
  const double t_final = 0.5 * (lo + hi);
  const Grid1D grid = space_grid(cfg);
  const TimeGrid time = horizon_grid(t_final);
  const Activation id = Activation::from_name("identity");
  const DensityField f0 = test1_initial(grid);
  const ControlPath curved = ControlPath::sample(
      time, [](double) { return 0.0; }, [](double t) { return t * t + 1.0; });
  const ControlPath flat = ControlPath::sample(
      time, [](double) { return 0.0; }, [&](double) { return beta / t_final; });
  return measures::wasserstein1(optim::forward_solve(curved, f0, id, cfg).back(),
                                optim::forward_solve(flat, f0, id, cfg).back());
}

double verify_controllability_scale(double alpha, double t_final, const RunConfig& cfg) {
  if (!(t_final > 0.0)) throw DomainError("horizon must be positive");
  Scenario s = build_scale_control(alpha);
  s.t_final = t_final;
  s.config = cfg;
  const double w = -alpha / t_final;
  s.exact_controls = ControlPath::sample(
      horizon_grid(t_final), [w](double) { return w; }, [w](double) { return -w * 1.0; });
  s.dt = s.exact_controls->grid().dt();
  const Problem p = materialize(s);
  return measures::wasserstein1(
      optim::forward_solve(*s.exact_controls, p.f0, s.activation, s.config).back(), p.g);
}

// ---------------------------------------------------------------------------------------------
// Mean-field convergence

std::vector<double> sample_density(const DensityField& f, std::size_t m, std::uint64_t seed) {
  const Grid1D& grid = f.grid;
  std::vector<double> cdf(f.values.size() + 1, 0.0);
  for (std::size_t j = 0; j < f.values.size(); ++j) {
    if (f.values[j] < 0.0) throw DomainError("cannot sample a density with negative cells");
    cdf[j + 1] = cdf[j] + f.values[j] * grid.dx();
  }
  const double total = cdf.back();
  if (!(total > 0.0)) throw DomainError("cannot sample a density without mass");
  std::mt19937_64 rng(seed);
  std::vector<double> out(m);
  for (double& x : out) {
    // 53 random bits give a uniform double in [0, 1) identically on every platform.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    auto j = static_cast<std::size_t>(std::distance(cdf.begin(), it)) - 1;
    j = std::min(j, f.values.size() - 1);
    const double frac = std::clamp((u - cdf[j]) / (f.values[j] * grid.dx()), 0.0, 1.0);
    x = grid.interface(static_cast<int>(j)) + frac * grid.dx();
  }
  return out;
}

ConvergenceReport run_convergence_study(const Scenario& s, int threads) {
  if (s.m_list.empty()) throw DomainError("convergence study needs a nonempty m_list");
  const Problem p = materialize(s);
  const ControlPath& c = *s.exact_controls;
  const DensityField f_T = optim::forward_solve(c, p.f0, s.activation, s.config).back();
  ConvergenceReport report{{}, 0.0, true};
  for (int m : s.m_list) {
    ConvergencePoint pt{m, {}, 0.0};
    for (int k = 0; k < s.n_seeds; ++k) {
      std::vector<double> x0 = sample_density(p.f0, static_cast<std::size_t>(m), s.seed + static_cast<std::uint64_t>(k));
      ParticleEnsemble ens(1, x0, x0);
      const ParticleEnsemble end =
          particle::ode_integrate(ens, c, s.activation, p.time, particle::Integrator::RK4, threads);
      const measures::Histogram h = measures::particles_to_density(end, p.grid);
      if (h.outside > 0) throw DomainError("particles left the domain; widen it");
      pt.w1_per_seed.push_back(measures::wasserstein1(h.field, f_T));
    }
    pt.mean_w1 = std::accumulate(pt.w1_per_seed.begin(), pt.w1_per_seed.end(), 0.0) / s.n_seeds;
    if (!report.points.empty() && !(pt.mean_w1 < report.points.back().mean_w1)) report.monotone = false;
    report.points.push_back(std::move(pt));
  }
  if (report.points.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(report.points.size());
    for (const auto& pt : report.points) {
      const double lx = std::log(static_cast<double>(pt.m)), ly = std::log(pt.mean_w1);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
    }
    report.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  return report;
}

}  // namespace scenarios
}  // namespace mfrn
