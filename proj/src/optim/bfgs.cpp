#include "nsr/optim/bfgs.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <optional>

#include "nsr/error.hpp"

namespace nsr::optim {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

struct Trial {
  double alpha;
  double f;
  double slope;
  std::vector<double> x;
  std::vector<double> g;
};

class LineSearch {
 public:
  LineSearch(const Objective& f, const Gradient& grad, std::span<const double> x, std::span<const double> p, double f0,
             double slope0, const BfgsConfig& cfg, int& evals)
      : f_(f), grad_(grad), x_(x), p_(p), f0_(f0), d0_(slope0), cfg_(cfg), evals_(evals) {}

  std::optional<Trial> run(double alpha) {
    Trial prev{0.0, f0_, d0_, {}, {}};
    for (int i = 0; i < cfg_.max_line_search_steps; ++i) {
      Trial t = probe(alpha);
      if (!std::isfinite(t.f) || t.f > f0_ + cfg_.wolfe_c1 * alpha * d0_ || (i > 0 && t.f >= prev.f))
        return zoom(prev, t);
      with_slope(t);
      if (!std::isfinite(t.slope)) return zoom(prev, t);
      if (std::fabs(t.slope) <= -cfg_.wolfe_c2 * d0_) return refine(std::move(t));
      if (t.slope >= 0.0) return zoom(t, prev);
      prev = std::move(t);
      alpha *= 2.0;
    }
    return std::nullopt;
  }

 private:
  Trial probe(double alpha) {
    Trial t{alpha, 0.0, NAN, std::vector<double>(x_.size()), {}};
    for (std::size_t i = 0; i < x_.size(); ++i) t.x[i] = x_[i] + alpha * p_[i];
    t.f = f_(t.x);
    ++evals_;
    ++steps_;
    return t;
  }

  bool wolfe(const Trial& t) const {
    return std::isfinite(t.f) && t.f <= f0_ + cfg_.wolfe_c1 * t.alpha * d0_ &&
           std::fabs(t.slope) <= -cfg_.wolfe_c2 * d0_;
  }

  // One secant step on phi' when the accepted point is far from a line
  // minimum; exact on quadratics. Kept only if it also satisfies Wolfe and
  // lowers f.
  Trial refine(Trial t) {
    if (std::fabs(t.slope) <= 1e-2 * std::fabs(d0_)) return t;
    const double denom = d0_ - t.slope;
    if (!(std::fabs(denom) > 0.0)) return t;
    const double a = t.alpha * d0_ / denom;
    if (!(a > 0.0) || !std::isfinite(a) || std::fabs(a - t.alpha) <= 1e-3 * t.alpha) return t;
    Trial r = probe(a);
    if (!std::isfinite(r.f) || r.f > t.f) return t;
    with_slope(r);
    return wolfe(r) ? r : t;
  }

  void with_slope(Trial& t) {
    t.g = grad_(t.x);
    t.slope = all_finite(t.g) ? dot(t.g, p_) : NAN;
  }

  // lo satisfies sufficient decrease and has the lower value; the minimizer
  // along p is bracketed between lo and hi.
  std::optional<Trial> zoom(Trial lo, Trial hi) {
    while (steps_ < cfg_.max_line_search_steps + 20) {
      const double a_lo = lo.alpha, a_hi = hi.alpha;
      const double width = a_hi - a_lo;
      if (std::fabs(width) <= 1e-16 * std::max(1.0, std::fabs(a_lo))) return std::nullopt;
      double a = 0.5 * (a_lo + a_hi);
      // Quadratic through phi(lo), phi'(lo), phi(hi).
      if (std::isfinite(hi.f) && std::isfinite(lo.slope)) {
        const double denom = 2.0 * (hi.f - lo.f - lo.slope * width);
        if (denom > 0.0) {
          const double q = a_lo - lo.slope * width * width / denom;
          const double lo_edge = std::min(a_lo, a_hi) + 0.1 * std::fabs(width);
          const double hi_edge = std::max(a_lo, a_hi) - 0.1 * std::fabs(width);
          a = std::clamp(q, lo_edge, hi_edge);
        }
      }
      Trial t = probe(a);
      if (!std::isfinite(t.f) || t.f > f0_ + cfg_.wolfe_c1 * a * d0_ || t.f >= lo.f) {
        hi = std::move(t);
        continue;
      }
      with_slope(t);
      if (!std::isfinite(t.slope)) {
        hi = std::move(t);
        continue;
      }
      if (std::fabs(t.slope) <= -cfg_.wolfe_c2 * d0_) return t;
      if (t.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
      lo = std::move(t);
    }
    return std::nullopt;
  }

  const Objective& f_;
  const Gradient& grad_;
  std::span<const double> x_, p_;
  double f0_, d0_;
  const BfgsConfig& cfg_;
  int& evals_;
  int steps_ = 0;
};

}  // namespace

void BfgsConfig::validate() const {
  if (!(wolfe_c1 > 0.0 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0))
    throw InvalidConfig("Wolfe constants must satisfy 0 < c1 < c2 < 1");
  if (max_iterations < 1 || max_line_search_steps < 1) throw InvalidConfig("BFGS counts must be positive");
  if (!(gradient_tolerance >= 0.0)) throw InvalidConfig("gradient_tolerance must be >= 0");
}

std::string_view to_string(BfgsStatus s) {
  switch (s) {
    case BfgsStatus::Converged: return "converged";
    case BfgsStatus::MaxIterations: return "max_iterations";
    case BfgsStatus::LineSearchFailed: return "line_search_failed";
    case BfgsStatus::NonFiniteObjective: return "non_finite_objective";
  }
  return "unknown";
}

BfgsResult minimize(const Objective& f, const Gradient& grad, std::vector<double> x0, const BfgsConfig& config,
                    const StepObserver& on_step) {
  config.validate();
  const std::size_t n = x0.size();
  BfgsResult result;
  result.minimizer = x0;
  if (!all_finite(x0)) {
    result.status = BfgsStatus::NonFiniteObjective;
    result.objective_value = NAN;
    return result;
  }
  double fx = f(x0);
  result.function_evaluations = 1;
  result.objective_value = fx;
  if (!std::isfinite(fx)) {
    result.status = BfgsStatus::NonFiniteObjective;
    return result;
  }
  std::vector<double> x = std::move(x0);
  std::vector<double> g = grad(x);
  if (!all_finite(g)) {
    result.status = BfgsStatus::LineSearchFailed;
    return result;
  }
  if (n == 0 || inf_norm(g) <= config.gradient_tolerance) {
    result.status = BfgsStatus::Converged;
    return result;
  }

  // Dense inverse-Hessian approximation, row-major.
  std::vector<double> H(n * n, 0.0);
  const auto reset = [&] {
    std::fill(H.begin(), H.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) H[i * n + i] = 1.0;
  };
  reset();
  bool identity = true;
  bool first_update = true;
  std::vector<double> p(n), s(n), y(n), Hy(n);

  result.status = BfgsStatus::MaxIterations;
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    for (std::size_t i = 0; i < n; ++i) p[i] = -dot(std::span(H).subspan(i * n, n), g);
    double slope0 = dot(g, p);
    if (!(slope0 < 0.0)) {
      reset();
      identity = true;
      for (std::size_t i = 0; i < n; ++i) p[i] = -g[i];
      slope0 = dot(g, p);
    }
    const double alpha0 = identity ? std::min(1.0, 1.0 / inf_norm(g)) : 1.0;
    LineSearch ls(f, grad, x, p, fx, slope0, config, result.function_evaluations);
    std::optional<Trial> step = ls.run(alpha0);
    if (!step && !identity) {
      // Retry once along steepest descent before giving up.
      reset();
      identity = true;
      first_update = true;
      for (std::size_t i = 0; i < n; ++i) p[i] = -g[i];
      slope0 = dot(g, p);
      LineSearch retry(f, grad, x, p, fx, slope0, config, result.function_evaluations);
      step = retry.run(std::min(1.0, 1.0 / inf_norm(g)));
    }
    if (!step) {
      // No decrease is representable any more: the predicted change is below
      // the rounding of f itself.
      const bool at_floor = -slope0 <= 4.0 * std::numeric_limits<double>::epsilon() * std::fabs(fx);
      result.status = at_floor ? BfgsStatus::Converged : BfgsStatus::LineSearchFailed;
      break;
    }
    assert(step->f <= fx + config.wolfe_c1 * step->alpha * slope0);
    assert(std::fabs(step->slope) <= -config.wolfe_c2 * slope0);
    if (on_step) on_step({step->alpha, fx, slope0, step->f, step->slope});

    for (std::size_t i = 0; i < n; ++i) {
      s[i] = step->x[i] - x[i];
      y[i] = step->g[i] - g[i];
    }
    x = std::move(step->x);
    g = std::move(step->g);
    fx = step->f;
    result.iterations = iter + 1;
    if (inf_norm(g) <= config.gradient_tolerance) {
      result.status = BfgsStatus::Converged;
      break;
    }

    const double sy = dot(s, y);
    if (!(sy > 1e-300)) continue;  // curvature condition fails: keep H
    if (first_update) {
      const double scale = sy / dot(y, y);
      std::fill(H.begin(), H.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) H[i * n + i] = scale;
      first_update = false;
    }
    // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
    const double rho = 1.0 / sy;
    for (std::size_t i = 0; i < n; ++i) Hy[i] = dot(std::span(H).subspan(i * n, n), y);
    const double yHy = dot(y, Hy);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        H[i * n + j] += -rho * (Hy[i] * s[j] + s[i] * Hy[j]) + (rho * rho * yHy + rho) * s[i] * s[j];
    identity = false;
  }
  result.minimizer = x;
  result.objective_value = fx;
  return result;
}

BfgsResult minimize(const Objective& f, std::vector<double> x0, const BfgsConfig& config) {
  const Gradient g = [&f](std::span<const double> x) {
    try {
      return numeric_grad(f, x);
    } catch (const NonFiniteObjective&) {
      return std::vector<double>(x.size(), NAN);  // the line search backs off
    }
  };
  return minimize(f, g, std::move(x0), config);
}

std::vector<double> numeric_grad(const Objective& f, std::span<const double> x, double eps) {
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = eps * std::max(1.0, std::fabs(x[i]));
    probe[i] = x[i] + h;
    const double fp = f(probe);
    probe[i] = x[i] - h;
    const double fm = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm)) throw NonFiniteObjective("objective not finite near x");
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace nsr::optim
