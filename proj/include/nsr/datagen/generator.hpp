#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nsr/expr/expression.hpp"
#include "nsr/random.hpp"

namespace nsr::datagen {

/// Operator names accepted in GeneratorConfig::operator_weights.
/// "-" is subtraction, materialized as a + (-1) * b.
const std::vector<std::string>& known_operator_names();

struct GeneratorConfig {
  int max_internal_nodes = 5;
  std::map<std::string, double> operator_weights = {
      {"+", 10}, {"*", 10}, {"-", 5},   {"/", 5},   {"sqrt", 4}, {"pow", 4},
      {"ln", 4}, {"exp", 4}, {"sin", 4}, {"cos", 4}, {"tan", 4},  {"arcsin", 1},
  };
  double leaf_variable_prob = 0.8;
  std::vector<int> integer_leaf_set = {-3, -2, -1, 1, 2, 3, 4, 5};
  std::uint64_t seed = 0;
  /// Pool entries longer than this are rejected; 0 disables the limit.
  int max_skeleton_length = 0;

  /// Throws InvalidConfig.
  void validate() const;
};

struct SamplerOperator {
  std::string name;
  expr::Symbol symbol;  // Add for subtraction
  int arity;
  bool subtraction;
  double weight;
};

/// Random unary-binary trees with a fixed number of internal nodes drawn
/// uniformly from 1..max_internal_nodes. Operators are drawn i.i.d. with
/// probability proportional to their weight.
class TreeSampler {
 public:
  explicit TreeSampler(const GeneratorConfig& config);

  /// `op_draws`, when given, receives the index into operators() of every
  /// internal node drawn.
  expr::Expression sample(Rng& rng, std::vector<int>* op_draws = nullptr) const;
  const std::vector<SamplerOperator>& operators() const { return ops_; }

 private:
  GeneratorConfig config_;
  std::vector<SamplerOperator> ops_;
  std::vector<double> cumulative_;
};

expr::Expression sample_tree(const GeneratorConfig& config, Rng& rng);

struct PoolStats {
  std::size_t total = 0;
  std::size_t unique = 0;
  std::map<std::size_t, std::size_t> length_histogram;
  double mean_length = 0.0;
};

struct SkeletonPool {
  std::vector<expr::Skeleton> skeletons;
  PoolStats stats;

  std::size_t size() const { return skeletons.size(); }
  bool empty() const { return skeletons.empty(); }
};

/// simplify, relabel variables, skeletonize. Empty when the result has no
/// variable or exceeds the configured length.
std::optional<expr::Skeleton> to_pool_entry(const expr::Expression& tree, const GeneratorConfig& config);

SkeletonPool build_pool(const GeneratorConfig& config, std::size_t count, Rng& rng);

PoolStats compute_stats(const std::vector<expr::Skeleton>& skeletons);

/// (skeleton infix, count) sorted by decreasing count, ties by infix.
std::vector<std::pair<std::string, std::size_t>> frequency_table(const std::vector<expr::Skeleton>& skeletons);

// --- numeric fingerprints ----------------------------------------------------

inline constexpr std::size_t kProbeCount = 500;

struct ProbeSet {
  expr::Columns points;
};

/// kProbeCount points drawn from U(-10, 10)^3.
ProbeSet make_probe_set(Rng& rng);
ProbeSet make_probe_set(std::uint64_t seed);

/// Values of the skeleton with every placeholder set to 1 at each probe.
std::vector<double> numeric_fingerprint(const expr::Skeleton& skel, const ProbeSet& probes);
std::vector<double> numeric_fingerprint(const expr::Expression& e, const ProbeSet& probes);

/// Per-probe relative tolerance; NaN only matches NaN, infinities match by sign.
bool fingerprints_equal(const std::vector<double>& a, const std::vector<double>& b, double rtol = 1e-6);

}  // namespace nsr::datagen
