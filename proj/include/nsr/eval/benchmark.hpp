#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "nsr/eval/suites.hpp"

namespace nsr::eval {

/// Gets the test-time points (absent variables zero) and returns a prediction.
using Regressor = std::function<expr::Expression(const expr::Columns& x, std::span<const double> y)>;

struct BenchmarkConfig {
  MetricConfig metrics;
  int test_points = 128;
  int threads = 1;  // 1 for regressors that are not safe to call concurrently
  std::uint64_t seed = 0;
};

struct BenchmarkRow {
  std::string name;
  bool a1_iid = false;
  bool a1_ood = false;
  bool a2_iid = false;
  bool a2_ood = false;
  double wall_seconds = 0.0;
  std::string predicted_infix;
  std::string error;  // set when the regressor failed; all accuracies are then false
};

struct Aggregate {
  double mean = 0.0;
  double sem = 0.0;  // sample standard deviation / sqrt(n)
};

Aggregate aggregate(std::span<const double> values);

struct BenchmarkReport {
  std::string suite;
  std::vector<BenchmarkRow> rows;
  Aggregate a1_iid, a1_ood, a2_iid, a2_ood, wall_seconds;
};

/// Test points are drawn on the iid supports (rows with non-finite y are
/// redrawn); A1/A2 use fresh eval_points samples on the iid and ood supports.
/// Record k uses generator stream k of the seed, so the report does not depend
/// on `threads`.
BenchmarkReport run_benchmark(const Regressor& regressor, const BenchmarkSuite& suite, const BenchmarkConfig& cfg);

/// Header name,a1_iid,a1_ood,a2_iid,a2_ood,wall_seconds,predicted_infix; the
/// last lines hold the mean and sem rows.
void write_report_csv(const BenchmarkReport& report, std::ostream& out);

}  // namespace nsr::eval
