#include "mfrn/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mfrn {

CflError::CflError(double max_speed, double dt, double dx, double cfl)
    : Error([&] {
        std::ostringstream os;
        os.precision(17);
        os << "CFL violation: max speed " << max_speed << " with dt " << dt << " and dx " << dx
           << " gives Courant number " << max_speed * dt / dx << " > " << cfl;
        return os.str();
      }()),
      max_speed_(max_speed) {}

ConfigError::ConfigError(int line, const std::string& message, std::string field)
    : Error(line > 0 ? "line " + std::to_string(line) + ": " + message : message),
      line_(line),
      field_(std::move(field)),
      detail_(message) {}

Activation Activation::from_name(std::string_view name) {
  if (name == "identity") return Activation(ActivationKind::Identity);
  if (name == "relu") return Activation(ActivationKind::ReLU);
  if (name == "sigmoid") return Activation(ActivationKind::Sigmoid);
  if (name == "tanh") return Activation(ActivationKind::Tanh);
  if (name == "gcu") return Activation(ActivationKind::GCU);
  throw DomainError("unknown activation '" + std::string(name) + "'");
}

std::string_view Activation::name() const {
  switch (kind_) {
    case ActivationKind::Identity: return "identity";
    case ActivationKind::ReLU: return "relu";
    case ActivationKind::Sigmoid: return "sigmoid";
    case ActivationKind::Tanh: return "tanh";
    case ActivationKind::GCU: return "gcu";
  }
  return "unknown";
}

bool Activation::bounded() const {
  return kind_ == ActivationKind::Sigmoid || kind_ == ActivationKind::Tanh;
}

double Activation::value(double x) const {
  switch (kind_) {
    case ActivationKind::Identity: return x;
    case ActivationKind::ReLU: return x > 0.0 ? x : 0.0;
    case ActivationKind::Sigmoid:
      if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
      else {
        const double e = std::exp(x);
        return e / (1.0 + e);
      }
    case ActivationKind::Tanh: return std::tanh(x);
    case ActivationKind::GCU: return x * std::cos(x);
  }
  return 0.0;
}

double Activation::derivative(double x) const {
  switch (kind_) {
    case ActivationKind::Identity: return 1.0;
    case ActivationKind::ReLU: return x > 0.0 ? 1.0 : 0.0;
    case ActivationKind::Sigmoid: {
      const double s = value(x);
      return s * (1.0 - s);
    }
    case ActivationKind::Tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case ActivationKind::GCU: return std::cos(x) - x * std::sin(x);
  }
  return 0.0;
}

double activation_eval(const Activation& a, double x) { return a.value(x); }

TimeGrid::TimeGrid(double t_final, int n_steps)
    : t_final_(t_final), dt_(t_final / n_steps), n_steps_(n_steps) {
  if (!(t_final > 0.0) || !std::isfinite(t_final)) throw DomainError("time grid needs T > 0");
  if (n_steps < 1) throw DomainError("time grid needs at least one step");
}

TimeGrid TimeGrid::from_step(double t_final, double dt) {
  if (!(dt > 0.0)) throw DomainError("time grid needs dt > 0");
  const double ratio = t_final / dt;
  const double n = std::round(ratio);
  if (n < 1.0 || std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio)) {
    throw DomainError("T is not an integer multiple of dt");
  }
  return TimeGrid(t_final, static_cast<int>(n));
}

ControlPath::ControlPath(TimeGrid grid, std::vector<double> w, std::vector<double> b)
    : grid_(grid), w_(std::move(w)), b_(std::move(b)) {
  if (w_.size() != grid_.n_nodes() || b_.size() != grid_.n_nodes()) {
    throw DomainError("control samples must have n_steps + 1 entries");
  }
}

ControlPath ControlPath::zero(const TimeGrid& grid) {
  return ControlPath(grid, std::vector<double>(grid.n_nodes(), 0.0),
                     std::vector<double>(grid.n_nodes(), 0.0));
}

ControlPath ControlPath::sample(const TimeGrid& grid, const std::function<double(double)>& w,
                                const std::function<double(double)>& b) {
  std::vector<double> ws(grid.n_nodes()), bs(grid.n_nodes());
  for (int k = 0; k <= grid.n_steps(); ++k) {
    ws[static_cast<std::size_t>(k)] = w(grid.node(k));
    bs[static_cast<std::size_t>(k)] = b(grid.node(k));
  }
  return ControlPath(grid, std::move(ws), std::move(bs));
}

std::pair<double, double> ControlPath::operator()(double t) const {
  const double T = grid_.t_final();
  const double slack = 1e-12 * T;
  if (!(t >= -slack && t <= T + slack)) {
    throw DomainError("control evaluated at t = " + std::to_string(t) + " outside [0, " +
                      std::to_string(T) + "]");
  }
  const double s = std::clamp(t / grid_.dt(), 0.0, static_cast<double>(grid_.n_steps()));
  const double nearest = std::round(s);
  if (std::abs(s - nearest) < 1e-9) return at_node(static_cast<int>(nearest));
  const auto k = static_cast<std::size_t>(std::floor(s));
  const double frac = s - static_cast<double>(k);
  return {w_[k] + frac * (w_[k + 1] - w_[k]), b_[k] + frac * (b_[k + 1] - b_[k])};
}

double ControlPath::lipschitz() const {
  double lw = 0.0, lb = 0.0;
  for (std::size_t k = 0; k + 1 < w_.size(); ++k) {
    lw = std::max(lw, std::abs(w_[k + 1] - w_[k]) / grid_.dt());
    lb = std::max(lb, std::abs(b_[k + 1] - b_[k]) / grid_.dt());
  }
  return lw + lb;
}

double ControlPath::sup_norm() const {
  double m = 0.0;
  for (std::size_t k = 0; k < w_.size(); ++k) m = std::max({m, std::abs(w_[k]), std::abs(b_[k])});
  return m;
}

std::pair<double, double> control_eval(const ControlPath& c, double t) { return c(t); }

void RunConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& msg) {
    throw ConfigError(0, field + " " + msg, field);
  };
  if (!(gamma_w >= 0.0)) fail("gamma_w", "must be nonnegative");
  if (!(gamma_b >= 0.0)) fail("gamma_b", "must be nonnegative");
  if (!(tol > 0.0)) fail("tol", "must be positive");
  if (max_armijo < 1) fail("max_armijo", "must be at least 1");
  if (!(cfl > 0.0 && cfl <= 1.0)) fail("cfl", "must lie in (0, 1]");
  if (!(domain[1] > domain[0])) fail("domain", "must satisfy a < b");
  if (n_cells < 8) fail("n_cells", "must be at least 8");
  if (dimension < 1) fail("dimension", "must be at least 1");
  if (max_iterations < 1) fail("max_iterations", "must be at least 1");
  if (substeps < 0) fail("substeps", "must be 0 (automatic) or a positive step count");
}

}  // namespace mfrn
