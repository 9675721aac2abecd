#include "nsr/eval/metrics.hpp"

#include <cmath>
#include <limits>

#include "nsr/error.hpp"

namespace nsr::eval {

void MetricConfig::validate() const {
  if (!(atol > 0.0) || !(rtol > 0.0)) throw InvalidConfig("atol and rtol must be positive");
  if (!(point_pass_fraction > 0.0 && point_pass_fraction <= 1.0))
    throw InvalidConfig("point_pass_fraction must lie in (0, 1]");
  if (!(r2_threshold > 0.0 && r2_threshold <= 1.0)) throw InvalidConfig("r2_threshold must lie in (0, 1]");
  if (eval_points < 1) throw InvalidConfig("eval_points must be positive");
}

namespace {

int value_class(double v) {
  if (std::isnan(v)) return 1;
  if (std::isinf(v)) return v > 0 ? 2 : 3;
  return 0;
}

}  // namespace

bool pointwise_close(double y, double yhat, const MetricConfig& cfg) {
  const int cy = value_class(y), ch = value_class(yhat);
  if (cy != 0 || ch != 0) return cy == ch;
  return std::abs(yhat - y) <= cfg.atol + cfg.rtol * std::abs(y);
}

expr::Columns sample_supports(const Supports& s, std::size_t n, Rng& rng) {
  expr::Columns x;
  for (int j = 0; j < expr::kMaxVariables; ++j) {
    auto& col = x.x[static_cast<std::size_t>(j)];
    col.resize(n, 0.0);
    if (const auto& iv = s[static_cast<std::size_t>(j)])
      for (double& v : col) v = uniform(rng, iv->lo, iv->hi);
  }
  return x;
}

double a1_fraction(std::span<const double> y, std::span<const double> yhat, const MetricConfig& cfg) {
  if (y.empty()) return 0.0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < y.size(); ++i) ok += pointwise_close(y[i], yhat[i], cfg) ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(y.size());
}

double r2_score(std::span<const double> y, std::span<const double> yhat) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (std::isfinite(y[i]) && std::isfinite(yhat[i])) {
      sum += y[i];
      ++n;
    }
  if (n < 2) return nan;
  const double mean = sum / static_cast<double>(n);
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (std::isfinite(y[i]) && std::isfinite(yhat[i])) {
      ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
      ss_tot += (y[i] - mean) * (y[i] - mean);
    }
  if (!(ss_tot > 0.0)) return nan;
  return 1.0 - ss_res / ss_tot;
}

namespace {

std::pair<std::vector<double>, std::vector<double>> evaluate_pair(const expr::Expression& truth,
                                                                  const expr::Expression& pred, const Supports& s,
                                                                  const MetricConfig& cfg, Rng& rng) {
  cfg.validate();
  const expr::Columns x = sample_supports(s, static_cast<std::size_t>(cfg.eval_points), rng);
  return {expr::Evaluator(truth).run(x), expr::Evaluator(pred).run(x)};
}

}  // namespace

bool a1_accuracy(const expr::Expression& truth, const expr::Expression& pred, const Supports& s,
                 const MetricConfig& cfg, Rng& rng) {
  const auto [y, yhat] = evaluate_pair(truth, pred, s, cfg, rng);
  return a1_fraction(y, yhat, cfg) > cfg.point_pass_fraction;
}

bool a2_r2(const expr::Expression& truth, const expr::Expression& pred, const Supports& s, const MetricConfig& cfg,
           Rng& rng) {
  const auto [y, yhat] = evaluate_pair(truth, pred, s, cfg, rng);
  const double r2 = r2_score(y, yhat);
  return r2 > cfg.r2_threshold;
}

Supports ood_support(const Supports& s) {
  Supports out = s;
  for (auto& iv : out)
    if (iv) {
      const double w = iv->hi - iv->lo;
      iv = Interval{iv->lo - w, iv->hi + w};
    }
  return out;
}

}  // namespace nsr::eval
