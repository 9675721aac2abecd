#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nsr/datagen/batch.hpp"
#include "nsr/expr/expression.hpp"
#include "nsr/random.hpp"

namespace nsr::eval {

using datagen::Interval;
/// Per-variable support; absent variables are held at 0.
using Supports = std::array<std::optional<Interval>, expr::kMaxVariables>;

struct MetricConfig {
  double atol = 1e-3;
  double rtol = 0.05;
  double point_pass_fraction = 0.95;
  double r2_threshold = 0.95;
  int eval_points = 10000;

  void validate() const;
};

/// |yhat - y| <= atol + rtol |y|. Non-finite values match only their own class.
bool pointwise_close(double y, double yhat, const MetricConfig& cfg);

/// eval_points-style uniform sample on the supports.
expr::Columns sample_supports(const Supports& s, std::size_t n, Rng& rng);

/// Fraction of points classified correctly.
double a1_fraction(std::span<const double> y, std::span<const double> yhat, const MetricConfig& cfg);
/// R^2 over pairs where both values are finite; NaN when fewer than two such
/// pairs or y has no variance there.
double r2_score(std::span<const double> y, std::span<const double> yhat);

bool a1_accuracy(const expr::Expression& truth, const expr::Expression& pred, const Supports& s,
                 const MetricConfig& cfg, Rng& rng);
bool a2_r2(const expr::Expression& truth, const expr::Expression& pred, const Supports& s, const MetricConfig& cfg,
           Rng& rng);

/// Each used interval widened by its own width on both sides.
Supports ood_support(const Supports& s);

}  // namespace nsr::eval
