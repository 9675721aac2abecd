#include "nsr/inference/regress.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <ostream>
#include <thread>

#include "nsr/error.hpp"

namespace nsr::inference {

using expr::Expression;
using expr::Skeleton;

namespace {

double millis_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

double mse_of(const std::vector<double>& pred, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = pred[i] - y[i];
    s += d * d;
  }
  const double m = s / static_cast<double>(y.size());
  return std::isfinite(m) ? m : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

double mse(const Expression& e, const expr::Columns& x, std::span<const double> y) {
  return mse_of(expr::Evaluator(e).run(x), y);
}

constexpr int kInitAttempts = 32;

Candidate fit_candidate(Candidate cand, const expr::Columns& x, std::span<const double> y,
                        const InferenceConfig& config, Rng& rng) {
  if (x.size() != y.size() || y.empty()) throw InvalidConfig("X and Y must be nonempty and of equal length");
  const auto t0 = std::chrono::steady_clock::now();
  const auto finish = [&](Candidate& c) {
    c.score = *c.mse + config.token_penalty * static_cast<double>(expr::expr_length(c.skeleton));
    c.fit_millis = millis_since(t0);
  };

  double best_mse = std::numeric_limits<double>::infinity();
  if (cand.skeleton.placeholder_count == 0) {
    const double direct = mse(cand.skeleton.expr, x, y);
    if (direct == 0.0) {
      cand.fitted = cand.skeleton.expr;
      cand.mse = 0.0;
      cand.constants.clear();
      finish(cand);
      return cand;
    }
    if (std::isfinite(direct)) {
      best_mse = direct;
      cand.fitted = cand.skeleton.expr;
      cand.constants.clear();
    }
  }

  const Skeleton target =
      cand.skeleton.placeholder_count > 0 ? cand.skeleton : expr::place_constants(cand.skeleton);
  const expr::Evaluator eval(target.expr);
  std::vector<double> pred(y.size());
  const optim::Objective objective = [&](std::span<const double> c) {
    eval.run(x, c, pred);
    const double m = mse_of(pred, y);
    return std::isnan(m) ? std::numeric_limits<double>::infinity() : m;
  };

  for (int r = 0; r < config.bfgs_restarts; ++r) {
    // Starting points where the skeleton is undefined on the data are redrawn.
    std::vector<double> c0(static_cast<std::size_t>(target.placeholder_count));
    for (int attempt = 0; attempt < kInitAttempts; ++attempt) {
      for (double& v : c0) v = uniform(rng, config.restart_init_range.lo, config.restart_init_range.hi);
      if (std::isfinite(objective(c0))) break;
    }
    const optim::BfgsResult res = optim::minimize(objective, std::move(c0), config.bfgs);
    if (res.status == optim::BfgsStatus::NonFiniteObjective || !std::isfinite(res.objective_value)) continue;
    if (res.objective_value < best_mse) {
      best_mse = res.objective_value;
      cand.constants = res.minimizer;
      cand.fitted = expr::instantiate(target, res.minimizer);
    }
  }
  if (!cand.fitted) throw FitFailed("no restart produced a finite fit for " + expr::to_infix(cand.skeleton.expr));
  cand.mse = best_mse;
  finish(cand);
  return cand;
}

namespace {

bool ranks_before(const Candidate& a, const Candidate& b) {
  if (*a.score != *b.score) return *a.score < *b.score;
  if (a.log_likelihood != b.log_likelihood) return a.log_likelihood > b.log_likelihood;
  return expr::expr_length(a.skeleton) < expr::expr_length(b.skeleton);
}

bool selectable(const Candidate& c) { return c.score && std::isfinite(*c.score); }

}  // namespace

Candidate select_best(std::span<const Candidate> cands) {
  const Candidate* best = nullptr;
  for (const Candidate& c : cands) {
    if (!selectable(c)) continue;
    if (!best || ranks_before(c, *best)) best = &c;
  }
  if (!best) throw NoValidCandidate("no candidate has a finite fitted score");
  return *best;
}

expr::Columns to_columns(const std::vector<std::vector<double>>& x, std::size_t n) {
  if (x.size() > static_cast<std::size_t>(expr::kMaxVariables))
    throw TooManyVariables("got " + std::to_string(x.size()) + " input columns; the model supports at most " +
                           std::to_string(expr::kMaxVariables));
  expr::Columns cols;
  for (int j = 0; j < expr::kMaxVariables; ++j) {
    if (static_cast<std::size_t>(j) < x.size()) {
      if (x[static_cast<std::size_t>(j)].size() != n) throw InvalidConfig("input columns and y differ in length");
      cols.x[static_cast<std::size_t>(j)] = x[static_cast<std::size_t>(j)];
    } else {
      cols.x[static_cast<std::size_t>(j)].assign(n, 0.0);
    }
  }
  return cols;
}

RegressResult regress_candidates(std::vector<Candidate> candidates, const expr::Columns& x, std::span<const double> y,
                                 const InferenceConfig& config) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::optional<Candidate>> fitted(candidates.size());
  const auto fit_one = [&](std::size_t i) {
    Rng rng = split_stream(config.seed, i);
    try {
      Candidate c = fit_candidate(candidates[i], x, y, config, rng);
      if (c.mse && !std::isnan(*c.mse)) fitted[i] = std::move(c);
    } catch (const FitFailed&) {
    }
  };
  const int threads = std::max(1, std::min<int>(config.threads, static_cast<int>(candidates.size())));
  if (threads == 1) {
    for (std::size_t i = 0; i < candidates.size(); ++i) fit_one(i);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = static_cast<std::size_t>(w); i < candidates.size(); i += static_cast<std::size_t>(threads))
          fit_one(i);
      });
    for (auto& th : pool) th.join();
  }

  RegressResult result;
  for (auto& f : fitted) {
    if (f) {
      result.report.candidates.push_back(std::move(*f));
    } else {
      ++result.report.dropped;
    }
  }
  result.report.fit_millis = millis_since(t0);
  std::stable_sort(result.report.candidates.begin(), result.report.candidates.end(), ranks_before);
  result.best = select_best(result.report.candidates);
  result.expression = *result.best.fitted;
  return result;
}

RegressResult regress(const model::Network<float>& net, const std::vector<std::vector<double>>& x,
                      std::span<const double> y, const InferenceConfig& config) {
  config.validate();
  if (y.empty()) throw InvalidConfig("regress needs at least one point");
  const expr::Columns cols = to_columns(x, y.size());

  auto t0 = std::chrono::steady_clock::now();
  const auto encoded = datagen::encode_points(cols, y);
  const model::Mat<float> z = net.encode(encoded, static_cast<int>(y.size()));
  const double encode_ms = millis_since(t0);

  t0 = std::chrono::steady_clock::now();
  BeamResult beams = beam_search(net, z, config);
  const double beam_ms = millis_since(t0);

  RegressResult result = regress_candidates(std::move(beams.candidates), cols, y, config);
  result.report.invalid_beams = beams.invalid.size();
  result.report.encode_millis = encode_ms;
  result.report.beam_millis = beam_ms;
  return result;
}

void write_report(const RegressReport& report, std::ostream& out) {
  int rank = 1;
  for (const Candidate& c : report.candidates) {
    nlohmann::json rec;
    rec["rank"] = rank++;
    rec["infix"] = c.fitted ? expr::to_infix(*c.fitted) : "";
    rec["skeleton"] = expr::to_infix(c.skeleton.expr);
    rec["prefix"] = expr::to_prefix(c.skeleton.expr);
    rec["log_likelihood"] = c.log_likelihood;
    rec["mse"] = c.mse ? nlohmann::json(*c.mse) : nlohmann::json(nullptr);
    rec["score"] = c.score ? nlohmann::json(*c.score) : nlohmann::json(nullptr);
    rec["constants"] = c.constants;
    rec["fit_millis"] = c.fit_millis;
    out << rec.dump() << '\n';
  }
}

}  // namespace nsr::inference
