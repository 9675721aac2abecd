#include "nsr/eval/benchmark.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <thread>

#include "nsr/error.hpp"

namespace nsr::eval {

Aggregate aggregate(std::span<const double> values) {
  Aggregate a;
  if (values.empty()) return a;
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  a.mean = sum / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.sem = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return a;
}

namespace {

// Test-time points on the iid supports; rows with non-finite ground truth are redrawn.
std::pair<expr::Columns, std::vector<double>> test_points(const EquationRecord& r, std::size_t n, Rng& rng) {
  const expr::Evaluator eval(r.expr);
  expr::Columns x;
  std::vector<double> y;
  for (int round = 0; round < 100 && y.size() < n; ++round) {
    const expr::Columns draw = sample_supports(r.supports, n, rng);
    const auto vals = eval.run(draw);
    for (std::size_t i = 0; i < vals.size() && y.size() < n; ++i)
      if (std::isfinite(vals[i])) {
        x.push_back(draw.row(i));
        y.push_back(vals[i]);
      }
  }
  if (y.empty()) throw EmptySupport(r.name + ": ground truth is non-finite on its whole support");
  return {std::move(x), std::move(y)};
}

BenchmarkRow run_record(const Regressor& regressor, const EquationRecord& r, const BenchmarkConfig& cfg, Rng rng) {
  BenchmarkRow row;
  row.name = r.name;
  try {
    const auto [x, y] = test_points(r, static_cast<std::size_t>(cfg.test_points), rng);
    const auto t0 = std::chrono::steady_clock::now();
    const expr::Expression pred = regressor(x, y);
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    row.predicted_infix = expr::to_infix(pred);
    const Supports ood = ood_support(r.supports);
    row.a1_iid = a1_accuracy(r.expr, pred, r.supports, cfg.metrics, rng);
    row.a1_ood = a1_accuracy(r.expr, pred, ood, cfg.metrics, rng);
    row.a2_iid = a2_r2(r.expr, pred, r.supports, cfg.metrics, rng);
    row.a2_ood = a2_r2(r.expr, pred, ood, cfg.metrics, rng);
  } catch (const std::exception& e) {
    row.a1_iid = row.a1_ood = row.a2_iid = row.a2_ood = false;
    row.error = e.what();
  }
  return row;
}

}  // namespace

BenchmarkReport run_benchmark(const Regressor& regressor, const BenchmarkSuite& suite, const BenchmarkConfig& cfg) {
  if (suite.records.empty()) throw InvalidConfig("benchmark suite is empty");
  if (cfg.test_points < 1) throw InvalidConfig("test_points must be positive");
  if (cfg.threads < 1) throw InvalidConfig("threads must be positive");
  cfg.metrics.validate();

  BenchmarkReport report;
  report.suite = suite.name;
  report.rows.resize(suite.size());
  const auto work = [&](std::size_t k) {
    report.rows[k] = run_record(regressor, suite.records[k], cfg, split_stream(cfg.seed, k));
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), suite.size());
  if (workers <= 1) {
    for (std::size_t k = 0; k < suite.size(); ++k) work(k);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t k = w; k < suite.size(); k += workers) work(k);
      });
    for (auto& t : pool) t.join();
  }

  const auto column = [&](auto field) {
    std::vector<double> v;
    for (const BenchmarkRow& r : report.rows) v.push_back(static_cast<double>(field(r)));
    return aggregate(v);
  };
  report.a1_iid = column([](const BenchmarkRow& r) { return r.a1_iid; });
  report.a1_ood = column([](const BenchmarkRow& r) { return r.a1_ood; });
  report.a2_iid = column([](const BenchmarkRow& r) { return r.a2_iid; });
  report.a2_ood = column([](const BenchmarkRow& r) { return r.a2_ood; });
  report.wall_seconds = column([](const BenchmarkRow& r) { return r.wall_seconds; });
  return report;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

void write_report_csv(const BenchmarkReport& report, std::ostream& out) {
  out << "name,a1_iid,a1_ood,a2_iid,a2_ood,wall_seconds,predicted_infix\n";
  for (const BenchmarkRow& r : report.rows)
    out << csv_field(r.name) << ',' << r.a1_iid << ',' << r.a1_ood << ',' << r.a2_iid << ',' << r.a2_ood << ','
        << r.wall_seconds << ',' << csv_field(r.predicted_infix) << '\n';
  const auto agg = [&](const char* label, auto member) {
    out << label << ',' << (report.a1_iid.*member) << ',' << (report.a1_ood.*member) << ','
        << (report.a2_iid.*member) << ',' << (report.a2_ood.*member) << ',' << (report.wall_seconds.*member) << ",\n";
  };
  agg("mean", &Aggregate::mean);
  agg("sem", &Aggregate::sem);
}

}  // namespace nsr::eval
