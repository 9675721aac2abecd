#pragma once

#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace nsr::optim {

using Objective = std::function<double(std::span<const double>)>;
using Gradient = std::function<std::vector<double>(std::span<const double>)>;

struct BfgsConfig {
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;  // on the infinity norm
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int max_line_search_steps = 30;

  /// Throws InvalidConfig.
  void validate() const;
};

enum class BfgsStatus { Converged, MaxIterations, LineSearchFailed, NonFiniteObjective };
std::string_view to_string(BfgsStatus s);

struct BfgsResult {
  std::vector<double> minimizer;
  double objective_value = 0.0;
  int iterations = 0;
  int function_evaluations = 0;
  BfgsStatus status = BfgsStatus::MaxIterations;
};

/// One accepted line-search step along direction p: phi(a) = f(x + a p).
struct LineSearchStep {
  double alpha;
  double f0;      // phi(0)
  double slope0;  // phi'(0)
  double f;       // phi(alpha)
  double slope;   // phi'(alpha)
};
using StepObserver = std::function<void(const LineSearchStep&)>;

BfgsResult minimize(const Objective& f, const Gradient& grad, std::vector<double> x0, const BfgsConfig& config = {},
                    const StepObserver& on_step = {});

/// Same, with central-difference gradients.
BfgsResult minimize(const Objective& f, std::vector<double> x0, const BfgsConfig& config = {});

/// Central differences with step eps * max(1, |x_i|). Throws NonFiniteObjective
/// when f is not finite at a probe point.
std::vector<double> numeric_grad(const Objective& f, std::span<const double> x, double eps = 1e-6);

}  // namespace nsr::optim
