#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "nsr/datagen/generator.hpp"
#include "nsr/datagen/half.hpp"
#include "nsr/expr/expression.hpp"
#include "nsr/random.hpp"

namespace nsr::datagen {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Interval&) const = default;
};

struct BatchSpec {
  int batch_size = 150;
  int max_constants = 3;
  Interval constant_range{1.0, 5.0};
  Interval support_extrema_range{-10.0, 10.0};
  int max_points = 500;
  double y_abs_cap = 1000.0;

  void validate() const;
};

/// Number of input features per point: x1..x3 then y.
inline constexpr int kFeatures = expr::kMaxVariables + 1;
inline constexpr int kEncodedRows = kFeatures * kBitsPerValue;

struct Example {
  expr::Columns x;  // absent variables are all zero
  std::vector<double> y;
  std::vector<expr::TokenId> target;  // sos, prefix, eos
  expr::Expression equation;          // the instantiated expression that produced y
  std::array<Interval, expr::kMaxVariables> support{};

  std::size_t size() const { return y.size(); }
};

/// Constant vector for a place_constants() skeleton: slots listed in
/// `chosen` get the matching value, every other slot is 1.
std::vector<double> constants_for(int placeholder_count, std::span<const int> chosen, std::span<const double> values);

/// Evaluates `e` on up to max_points points drawn uniformly from `support`
/// (variables not in `variable_mask` fixed at 0) and drops non-finite rows
/// and rows with |y| > y_abs_cap. Throws EmptySupport when nothing remains.
Example sample_points(const expr::Expression& e, unsigned variable_mask,
                      const std::array<Interval, expr::kMaxVariables>& support, const BatchSpec& spec, Rng& rng);

/// Per used variable: two draws from support_extrema_range, sorted (equal
/// draws are redrawn). Unused variables get {0, 0}.
std::array<Interval, expr::kMaxVariables> draw_support(unsigned variable_mask, const BatchSpec& spec, Rng& rng);

/// `fixed_support` replaces the random support extrema when given.
Example sample_example(const expr::Skeleton& skel, const BatchSpec& spec, Rng& rng,
                       const std::optional<std::array<Interval, expr::kMaxVariables>>& fixed_support = std::nullopt);

class TrainingBatch {
 public:
  int batch_size = 0;
  int n_points = 0;
  int max_len = 0;
  std::vector<double> points;          // [B][kFeatures][n_points]
  std::vector<std::uint8_t> encoded;   // [B][kEncodedRows][n_points]
  std::vector<expr::TokenId> targets;  // [B][max_len], pad 0
  std::vector<std::uint8_t> target_mask;

  double point(int b, int feature, int i) const {
    return points[(static_cast<std::size_t>(b) * kFeatures + feature) * n_points + i];
  }
  /// Row-major kEncodedRows x n_points block of example b.
  std::span<const std::uint8_t> encoded_example(int b) const {
    const std::size_t block = static_cast<std::size_t>(kEncodedRows) * n_points;
    return {encoded.data() + b * block, block};
  }
  std::span<const expr::TokenId> target(int b) const {
    return {targets.data() + static_cast<std::size_t>(b) * max_len, static_cast<std::size_t>(max_len)};
  }
};

/// Truncates every example to the smallest point count (dropping surplus
/// rows uniformly at random, keeping row order), encodes and pads.
TrainingBatch collate(std::span<const Example> examples, Rng& rng);

/// batch_size examples drawn uniformly from the pool; skeletons whose
/// sampled support is empty are redrawn.
TrainingBatch assemble_batch(const SkeletonPool& pool, const BatchSpec& spec, Rng& rng);

/// Draws one example, redrawing skeletons on EmptySupport.
Example draw_example(const SkeletonPool& pool, const BatchSpec& spec, Rng& rng);

/// Encoded point block for a single point set (row-major kEncodedRows x n).
std::vector<std::uint8_t> encode_points(const expr::Columns& x, std::span<const double> y);

/// Preview dump: comment line with the target tokens, header, one row per point.
void write_example_csv(const Example& ex, std::ostream& out);

}  // namespace nsr::datagen
