#include "nsr/datagen/batch.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "nsr/error.hpp"

namespace nsr::datagen {

using expr::Expression;

namespace {

bool valid_interval(const Interval& r) { return std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo < r.hi; }

// k distinct indices of 0..n-1, uniformly, via a partial Fisher-Yates shuffle.
std::vector<int> choose_without_replacement(int n, int k, Rng& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(uniform_int(rng, i, n - 1));
    std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
  }
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

}  // namespace

void BatchSpec::validate() const {
  if (batch_size < 1) throw InvalidConfig("batch_size must be >= 1");
  if (max_constants < 0) throw InvalidConfig("max_constants must be >= 0");
  if (max_points < 1) throw InvalidConfig("max_points must be >= 1");
  if (!valid_interval(constant_range)) throw InvalidConfig("constant_range must be a nonempty interval");
  if (!valid_interval(support_extrema_range)) throw InvalidConfig("support_extrema_range must be a nonempty interval");
  if (!(y_abs_cap > 0.0)) throw InvalidConfig("y_abs_cap must be positive");
}

std::vector<double> constants_for(int placeholder_count, std::span<const int> chosen, std::span<const double> values) {
  if (chosen.size() != values.size()) throw ArityMismatch("constant slots and values differ in length");
  std::vector<double> c(static_cast<std::size_t>(placeholder_count), 1.0);
  for (std::size_t k = 0; k < chosen.size(); ++k) {
    if (chosen[k] < 0 || chosen[k] >= placeholder_count) throw ArityMismatch("constant slot out of range");
    c[static_cast<std::size_t>(chosen[k])] = values[k];
  }
  return c;
}

Example sample_points(const Expression& e, unsigned variable_mask,
                      const std::array<Interval, expr::kMaxVariables>& support, const BatchSpec& spec, Rng& rng) {
  expr::Columns cols;
  for (auto& c : cols.x) c.reserve(static_cast<std::size_t>(spec.max_points));
  for (int i = 0; i < spec.max_points; ++i) {
    expr::Point p{};
    for (int j = 0; j < expr::kMaxVariables; ++j)
      p[j] = (variable_mask >> j) & 1u ? uniform(rng, support[j].lo, support[j].hi) : 0.0;
    cols.push_back(p);
  }
  const std::vector<double> y = expr::Evaluator(e).run(cols);

  Example ex;
  ex.equation = e;
  ex.support = support;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i]) || std::fabs(y[i]) > spec.y_abs_cap) continue;
    ex.x.push_back(cols.row(i));
    ex.y.push_back(y[i]);
  }
  if (ex.y.empty()) throw EmptySupport("no valid points for " + expr::to_infix(e));
  return ex;
}

std::array<Interval, expr::kMaxVariables> draw_support(unsigned variable_mask, const BatchSpec& spec, Rng& rng) {
  std::array<Interval, expr::kMaxVariables> support{};
  for (int j = 0; j < expr::kMaxVariables; ++j) {
    if (!((variable_mask >> j) & 1u)) continue;
    double a = 0.0, b = 0.0;
    do {
      a = uniform(rng, spec.support_extrema_range.lo, spec.support_extrema_range.hi);
      b = uniform(rng, spec.support_extrema_range.lo, spec.support_extrema_range.hi);
    } while (a == b);
    support[j] = {std::min(a, b), std::max(a, b)};
  }
  return support;
}

Example sample_example(const expr::Skeleton& skel, const BatchSpec& spec, Rng& rng,
                       const std::optional<std::array<Interval, expr::kMaxVariables>>& fixed_support) {
  const expr::Skeleton placed = expr::place_constants(skel);
  const int slots = placed.placeholder_count;
  const int n_c = static_cast<int>(uniform_int(rng, 0, std::min(spec.max_constants, slots)));
  const std::vector<int> chosen = choose_without_replacement(slots, n_c, rng);
  std::vector<double> values(chosen.size());
  for (double& v : values) v = uniform(rng, spec.constant_range.lo, spec.constant_range.hi);
  const Expression e = expr::instantiate(placed, constants_for(slots, chosen, values));

  const unsigned mask = skel.expr.variable_mask();
  const auto support = fixed_support ? *fixed_support : draw_support(mask, spec, rng);

  Example ex = sample_points(e, mask, support, spec, rng);
  ex.target.push_back(expr::token_id(expr::Symbol::Sos));
  for (auto t : expr::to_prefix(skel.expr)) ex.target.push_back(t);
  ex.target.push_back(expr::token_id(expr::Symbol::Eos));
  return ex;
}

std::vector<std::uint8_t> encode_points(const expr::Columns& x, std::span<const double> y) {
  const std::size_t n = y.size();
  std::vector<std::uint8_t> out(static_cast<std::size_t>(kEncodedRows) * n);
  for (int f = 0; f < kFeatures; ++f) {
    for (std::size_t i = 0; i < n; ++i) {
      const double v = f < expr::kMaxVariables ? x.x[f][i] : y[i];
      const auto bits = encode_multihot(v);
      for (int k = 0; k < kBitsPerValue; ++k)
        out[static_cast<std::size_t>(f * kBitsPerValue + k) * n + i] = bits[k];
    }
  }
  return out;
}

TrainingBatch collate(std::span<const Example> examples, Rng& rng) {
  if (examples.empty()) throw InvalidConfig("cannot collate an empty batch");
  TrainingBatch batch;
  batch.batch_size = static_cast<int>(examples.size());
  std::size_t n_min = examples.front().size();
  std::size_t max_len = 0;
  for (const Example& ex : examples) {
    n_min = std::min(n_min, ex.size());
    max_len = std::max(max_len, ex.target.size());
  }
  batch.n_points = static_cast<int>(n_min);
  batch.max_len = static_cast<int>(max_len);
  batch.points.assign(examples.size() * kFeatures * n_min, 0.0);
  batch.encoded.reserve(examples.size() * kEncodedRows * n_min);
  batch.targets.assign(examples.size() * max_len, expr::token_id(expr::Symbol::Pad));
  batch.target_mask.assign(examples.size() * max_len, 0);

  for (std::size_t b = 0; b < examples.size(); ++b) {
    const Example& ex = examples[b];
    std::vector<int> keep = choose_without_replacement(static_cast<int>(ex.size()), static_cast<int>(n_min), rng);
    std::sort(keep.begin(), keep.end());
    expr::Columns x;
    std::vector<double> y;
    for (int i : keep) {
      x.push_back(ex.x.row(static_cast<std::size_t>(i)));
      y.push_back(ex.y[static_cast<std::size_t>(i)]);
    }
    for (std::size_t i = 0; i < n_min; ++i) {
      for (int j = 0; j < expr::kMaxVariables; ++j) batch.points[(b * kFeatures + j) * n_min + i] = x.x[j][i];
      batch.points[(b * kFeatures + expr::kMaxVariables) * n_min + i] = y[i];
    }
    const auto enc = encode_points(x, y);
    batch.encoded.insert(batch.encoded.end(), enc.begin(), enc.end());
    for (std::size_t t = 0; t < ex.target.size(); ++t) {
      batch.targets[b * max_len + t] = ex.target[t];
      batch.target_mask[b * max_len + t] = 1;
    }
  }
  return batch;
}

Example draw_example(const SkeletonPool& pool, const BatchSpec& spec, Rng& rng) {
  if (pool.empty()) throw InvalidConfig("skeleton pool is empty");
  // Bounded so a pool of skeletons that are undefined everywhere cannot hang.
  constexpr int kMaxAttempts = 100000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const auto idx = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(pool.size()) - 1));
    try {
      return sample_example(pool.skeletons[idx], spec, rng);
    } catch (const EmptySupport&) {
    }
  }
  throw EmptySupport("no skeleton in the pool produced valid points");
}

TrainingBatch assemble_batch(const SkeletonPool& pool, const BatchSpec& spec, Rng& rng) {
  spec.validate();
  std::vector<Example> examples;
  examples.reserve(static_cast<std::size_t>(spec.batch_size));
  for (int b = 0; b < spec.batch_size; ++b) examples.push_back(draw_example(pool, spec, rng));
  return collate(examples, rng);
}

void write_example_csv(const Example& ex, std::ostream& out) {
  out << "# target:";
  for (auto t : ex.target) out << ' ' << t;
  out << "\n# equation: " << expr::to_infix(ex.equation) << "\nx1,x2,x3,y\n";
  out.precision(17);
  for (std::size_t i = 0; i < ex.size(); ++i)
    out << ex.x.x[0][i] << ',' << ex.x.x[1][i] << ',' << ex.x.x[2][i] << ',' << ex.y[i] << '\n';
}

}  // namespace nsr::datagen
