#include "mfrn/cli.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "mfrn/csv.hpp"
#include "mfrn/measures.hpp"
#include "mfrn/optim.hpp"
#include "mfrn/scenarios.hpp"

namespace mfrn::cli {

namespace fs = std::filesystem;

std::string content_hash(const std::string& content) {
  const std::string blob = "blob " + std::to_string(content.size()) + '\0' + content;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw Error("cannot allocate a digest context");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, blob.data(), blob.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw Error("SHA-1 digest failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i)
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return os.str();
}

int threads_from_env() {
  const char* v = std::getenv("MFRN_THREADS");
  if (v == nullptr) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (end == v || *end != '\0' || n < 1) return 1;
  return static_cast<int>(std::min<long>(n, 1024));
}

void write_manifest(const RunManifest& m) {
  const RunConfig& c = m.config;
  csv::Table t;
  t.header = {"key", "value"};
  auto add = [&](const std::string& k, const std::string& v) { t.rows.push_back({k, v}); };
  add("scenario", m.scenario);
  add("out_dir", m.out_dir.string());
  add("config_hash", m.config_hash);
  add("gamma_w", csv::format(c.gamma_w));
  add("gamma_b", csv::format(c.gamma_b));
  add("tol", csv::format(c.tol));
  add("max_armijo", std::to_string(c.max_armijo));
  add("cfl", csv::format(c.cfl));
  add("domain_a", csv::format(c.domain[0]));
  add("domain_b", csv::format(c.domain[1]));
  add("n_cells", std::to_string(c.n_cells));
  add("dimension", std::to_string(c.dimension));
  add("max_iterations", std::to_string(c.max_iterations));
  add("substeps", std::to_string(c.substeps));
  csv::write(m.out_dir / "manifest.csv", t);
  if (!m.timings.empty()) {
    std::vector<std::vector<std::string>> rows;
    csv::Table tt;
    tt.header = {"phase", "seconds"};
    for (const auto& p : m.timings) tt.rows.push_back({p.phase, csv::format(p.seconds)});
    csv::write(m.out_dir / "timings.csv", tt);
  }
}

RunManifest read_manifest(const fs::path& dir) {
  const fs::path path = dir / "manifest.csv";
  if (!fs::exists(path)) throw Error(dir.string() + " has no manifest.csv");
  const csv::Table t = csv::read(path);
  std::map<std::string, std::string> kv;
  for (const auto& row : t.rows)
    if (row.size() >= 2) kv[row[0]] = row[1];
  auto get = [&](const std::string& k) {
    const auto it = kv.find(k);
    if (it == kv.end()) throw Error(path.string() + ": missing key " + k);
    return it->second;
  };
  RunManifest m;
  m.scenario = get("scenario");
  m.out_dir = get("out_dir");
  m.config_hash = get("config_hash");
  RunConfig& c = m.config;
  c.gamma_w = std::stod(get("gamma_w"));
  c.gamma_b = std::stod(get("gamma_b"));
  c.tol = std::stod(get("tol"));
  c.max_armijo = std::stoi(get("max_armijo"));
  c.cfl = std::stod(get("cfl"));
  c.domain = {std::stod(get("domain_a")), std::stod(get("domain_b"))};
  c.n_cells = std::stoi(get("n_cells"));
  c.dimension = std::stoi(get("dimension"));
  c.max_iterations = std::stoi(get("max_iterations"));
  c.substeps = std::stoi(get("substeps"));
  return m;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double variance(const DensityField& f) {
  const double m = measures::moment(f, 1);
  return measures::moment(f, 2) - m * m;
}

void write_summary(const fs::path& path, const std::vector<std::pair<std::string, double>>& rows) {
  csv::Table t;
  t.header = {"key", "value"};
  for (const auto& [k, v] : rows) t.rows.push_back({k, csv::format(v)});
  csv::write(path, t);
}

// Snapshots at t = 0, T/4, T/2, 3T/4, T.
std::vector<DensityField> selected(const std::vector<DensityField>& traj) {
  std::vector<DensityField> out;
  const std::size_t n = traj.size() - 1;
  for (std::size_t q = 0; q <= 4; ++q) out.push_back(traj[q * n / 4]);
  return out;
}

struct Trajectory {
  double max_mass_error = 0.0;
  double min_value = std::numeric_limits<double>::infinity();
};

Trajectory audit(const std::vector<DensityField>& traj) {
  Trajectory a;
  const double m0 = traj.front().mass();
  for (const auto& f : traj) {
    a.max_mass_error = std::max(a.max_mass_error, std::abs(f.mass() - m0));
    a.min_value = std::min(a.min_value, f.min_value());
  }
  return a;
}

void write_fields(const fs::path& dir, const Problem& p, const std::vector<DensityField>& traj) {
  fvm::write_csv(dir / "f0.csv", std::span(&p.f0, 1));
  fvm::write_csv(dir / "g.csv", std::span(&p.g, 1));
  fvm::write_csv(dir / "fT.csv", std::span(&traj.back(), 1));
  const auto snaps = selected(traj);
  fvm::write_csv(dir / "snapshots.csv", snaps);
}

void run_training(const Scenario& s, const Problem& p, const fs::path& dir, RunManifest& manifest,
                  std::ostream& log, std::ostream& err) {
  auto t0 = Clock::now();
  const OptimState st =
      optim::gauss_seidel_train(p.f0, p.target, p.initial_controls, s.activation, s.config);
  manifest.timings.push_back({"train", seconds_since(t0)});
  for (const auto& w : st.warnings) err << "warning: " << w << '\n';

  t0 = Clock::now();
  const auto traj = optim::forward_solve(st.controls, p.f0, s.activation, s.config);
  const DensityField& fT = traj.back();
  const Trajectory a = audit(traj);
  optim::write_iteration_csv(dir / "iterations.csv", st);
  optim::write_controls_csv(dir / "controls.csv", st.controls);
  if (s.exact_controls) optim::write_controls_csv(dir / "exact_controls.csv", *s.exact_controls);
  write_fields(dir, p, traj);
  write_summary(dir / "summary.csv",
                {{"final_cost", st.cost_history.back()},
                 {"final_w1", measures::wasserstein1(fT, p.g)},
                 {"iterations", st.iteration},
                 {"converged", st.converged ? 1.0 : 0.0},
                 {"stalled", st.stalled ? 1.0 : 0.0},
                 {"final_e_k", st.rel_error_history.empty() ? 0.0 : st.rel_error_history.back()},
                 {"lipschitz", st.controls.lipschitz()},
                 {"mean_fT", measures::moment(fT, 1)},
                 {"mean_g", p.target.mean},
                 {"variance_fT", variance(fT)},
                 {"variance_g", p.target.variance()},
                 {"max_mass_error", a.max_mass_error},
                 {"min_density", a.min_value}});
  manifest.timings.push_back({"output", seconds_since(t0)});
  log << s.name << ": " << st.iteration << " iterations, cost " << csv::format(st.cost_history.back())
      << (st.converged ? (st.stalled ? ", converged (line search stalled)" : ", converged")
                       : ", iteration cap reached") << '\n';
}

void run_exact(const Scenario& s, const Problem& p, const fs::path& dir, RunManifest& manifest,
               std::ostream& log) {
  auto t0 = Clock::now();
  const auto traj = optim::forward_solve(*s.exact_controls, p.f0, s.activation, s.config);
  manifest.timings.push_back({"solve", seconds_since(t0)});
  t0 = Clock::now();
  const Trajectory a = audit(traj);
  const double w1 = measures::wasserstein1(traj.back(), p.g);
  optim::write_controls_csv(dir / "controls.csv", *s.exact_controls);
  write_fields(dir, p, traj);
  write_summary(dir / "summary.csv",
                {{"final_cost", optim::terminal_loss(traj.back(), p.target) +
                                    optim::regularization(*s.exact_controls, s.config)},
                 {"final_w1", w1},
                 {"iterations", 0.0},
                 {"converged", 1.0},
                 {"mean_fT", measures::moment(traj.back(), 1)},
                 {"mean_g", p.target.mean},
                 {"variance_fT", variance(traj.back())},
                 {"variance_g", p.target.variance()},
                 {"max_mass_error", a.max_mass_error},
                 {"min_density", a.min_value}});
  manifest.timings.push_back({"output", seconds_since(t0)});
  log << s.name << ": W1(f_T, g) = " << csv::format(w1) << '\n';
}

void run_convergence(const Scenario& s, const fs::path& dir, RunManifest& manifest, int threads,
                     std::ostream& log) {
  auto t0 = Clock::now();
  const auto report = scenarios::run_convergence_study(s, threads);
  manifest.timings.push_back({"solve", seconds_since(t0)});
  std::vector<std::vector<double>> rows;
  for (const auto& pt : report.points)
    for (std::size_t k = 0; k < pt.w1_per_seed.size(); ++k)
      rows.push_back({static_cast<double>(pt.m), static_cast<double>(s.seed + k), pt.w1_per_seed[k],
                      pt.mean_w1});
  csv::write(dir / "convergence.csv", {"m", "seed", "w1", "mean_w1"}, rows);
  optim::write_controls_csv(dir / "controls.csv", *s.exact_controls);
  write_summary(dir / "summary.csv",
                {{"slope", report.slope}, {"monotone", report.monotone ? 1.0 : 0.0}});
  log << "convergence: slope " << csv::format(report.slope)
      << (report.monotone ? ", monotone" : ", not monotone") << '\n';
}

}  // namespace

int run(const RunOptions& opts, std::ostream& log, std::ostream& err) {
  Scenario s;
  try {
    s = scenarios::load(opts.config);
    if (opts.seed) s.seed = *opts.seed;
    if (opts.activation) {
      try {
        s.activation = Activation::from_name(*opts.activation);
      } catch (const DomainError& e) {
        throw ConfigError(0, std::string("--activation: ") + e.what(), "activation");
      }
    }
    scenarios::validate(s);
  } catch (const ConfigError& e) {
    err << "invalid config: " << e.what() << '\n';
    return kInvalidConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }

  try {
    fs::create_directories(opts.out);
    RunManifest manifest{s.name, s.config, opts.out, content_hash(scenarios::to_json(s)), {}};
    write_manifest(manifest);

    auto t0 = Clock::now();
    const Problem p = scenarios::materialize(s);
    manifest.timings.push_back({"setup", seconds_since(t0)});

    if (s.name == "convergence") run_convergence(s, opts.out, manifest, opts.threads, log);
    else if (s.name == "shift_control" || s.name == "scale_control") run_exact(s, p, opts.out, manifest, log);
    else run_training(s, p, opts.out, manifest, log, err);
    write_manifest(manifest);
    return kSuccess;
  } catch (const DivergenceError& e) {
    err << "solver diverged: " << e.what() << '\n';
    return kDivergence;
  } catch (const CflError& e) {
    err << "solver diverged: " << e.what() << '\n';
    return kDivergence;
  } catch (const ConfigError& e) {
    err << "invalid config: " << e.what() << '\n';
    return kInvalidConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

namespace {

std::vector<double> column_or_empty(const fs::path& path, const std::string& name) {
  if (!fs::exists(path)) return {};
  return csv::read(path).column(name);
}

}  // namespace

int compare(const fs::path& dir_a, const fs::path& dir_b, const fs::path& out, std::ostream& err) {
  try {
    const RunManifest ma = read_manifest(dir_a);
    const RunManifest mb = read_manifest(dir_b);
    if (ma.config.n_cells != mb.config.n_cells || ma.config.domain != mb.config.domain)
      throw DomainError("spatial grids differ: " + std::to_string(ma.config.n_cells) + " vs " +
                        std::to_string(mb.config.n_cells) + " cells");
    const csv::Table ca = csv::read(dir_a / "controls.csv");
    const csv::Table cb = csv::read(dir_b / "controls.csv");
    const auto ta = ca.column("t"), tb = cb.column("t");
    if (ta != tb) throw DomainError("time grids of the control paths differ");

    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::vector<double>> rows;
    std::vector<std::string> series;
    auto align = [&](const std::string& name, const std::vector<double>& a,
                     const std::vector<double>& b, const std::vector<double>* t) {
      const std::size_t n = std::max(a.size(), b.size());
      for (std::size_t k = 0; k < n; ++k) {
        const double va = k < a.size() ? a[k] : nan;
        const double vb = k < b.size() ? b[k] : nan;
        series.push_back(name);
        // Entries missing from both runs (e_k at iteration 0) agree.
        const double delta = std::isnan(va) && std::isnan(vb) ? 0.0 : vb - va;
        rows.push_back({static_cast<double>(k), t ? (*t)[k] : nan, va, vb, delta});
      }
    };
    const fs::path ia = dir_a / "iterations.csv", ib = dir_b / "iterations.csv";
    const auto cost_a = column_or_empty(ia, "cost"), cost_b = column_or_empty(ib, "cost");
    align("cost", cost_a, cost_b, nullptr);
    align("e_k", column_or_empty(ia, "e_k"), column_or_empty(ib, "e_k"), nullptr);
    align("w", ca.column("w"), cb.column("w"), &ta);
    align("b", ca.column("b"), cb.column("b"), &ta);
    const auto sa = csv::read(dir_a / "summary.csv"), sb = csv::read(dir_b / "summary.csv");
    auto summary_value = [](const csv::Table& t, const std::string& key) {
      for (const auto& row : t.rows)
        if (row.size() >= 2 && row[0] == key) return std::stod(row[1]);
      return std::numeric_limits<double>::quiet_NaN();
    };
    for (const char* key : {"final_cost", "final_w1"}) {
      const double va = summary_value(sa, key), vb = summary_value(sb, key);
      series.push_back(key);
      rows.push_back({0.0, nan, va, vb, vb - va});
    }

    csv::Table t;
    t.header = {"series", "index", "t", "a", "b", "delta"};
    for (std::size_t r = 0; r < rows.size(); ++r) {
      std::vector<std::string> row{series[r]};
      row.push_back(std::to_string(static_cast<long long>(rows[r][0])));
      for (std::size_t c = 1; c < rows[r].size(); ++c) row.push_back(csv::format(rows[r][c]));
      t.rows.push_back(std::move(row));
    }
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    csv::write(out, t);
    return kSuccess;
  } catch (const std::exception& e) {
    err << "compare failed: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace mfrn::cli
