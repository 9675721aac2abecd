#include "nsr/datagen/generator.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "nsr/error.hpp"

namespace nsr::datagen {

using expr::Expression;
using expr::Node;
using expr::Symbol;

namespace {

struct OperatorInfo {
  Symbol symbol;
  int arity;
  bool subtraction;
};

const std::vector<std::pair<std::string, OperatorInfo>>& operator_table() {
  static const std::vector<std::pair<std::string, OperatorInfo>> table = {
      {"+", {Symbol::Add, 2, false}},        {"-", {Symbol::Add, 2, true}},
      {"*", {Symbol::Mul, 2, false}},        {"/", {Symbol::Div, 2, false}},
      {"pow", {Symbol::Pow, 2, false}},      {"sqrt", {Symbol::Sqrt, 1, false}},
      {"ln", {Symbol::Ln, 1, false}},        {"exp", {Symbol::Exp, 1, false}},
      {"sin", {Symbol::Sin, 1, false}},      {"cos", {Symbol::Cos, 1, false}},
      {"tan", {Symbol::Tan, 1, false}},      {"arcsin", {Symbol::Arcsin, 1, false}},
      {"arccos", {Symbol::Arccos, 1, false}}, {"arctan", {Symbol::Arctan, 1, false}},
      {"sinh", {Symbol::Sinh, 1, false}},    {"cosh", {Symbol::Cosh, 1, false}},
      {"tanh", {Symbol::Tanh, 1, false}},    {"coth", {Symbol::Coth, 1, false}},
  };
  return table;
}

const OperatorInfo* find_operator(const std::string& name) {
  for (const auto& [n, info] : operator_table())
    if (n == name) return &info;
  return nullptr;
}

// Growing tree: a node is either an open hole, an operator, or a leaf.
struct Slot {
  int op = -1;  // index into operators, -1 for leaves and holes
  Node leaf{};
  int kids[2] = {-1, -1};
  bool exponent = false;
};

}  // namespace

const std::vector<std::string>& known_operator_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [n, info] : operator_table()) out.push_back(n);
    return out;
  }();
  return names;
}

void GeneratorConfig::validate() const {
  if (max_internal_nodes < 0) throw InvalidConfig("max_internal_nodes must be >= 0");
  bool any_positive = false;
  for (const auto& [name, w] : operator_weights) {
    if (!find_operator(name)) throw InvalidConfig("unknown operator '" + name + "' in operator_weights");
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidConfig("operator weight for '" + name + "' must be finite and >= 0");
    any_positive = any_positive || w > 0.0;
  }
  if (!any_positive) throw InvalidConfig("at least one operator weight must be positive");
  if (!(leaf_variable_prob >= 0.0 && leaf_variable_prob <= 1.0))
    throw InvalidConfig("leaf_variable_prob must lie in [0, 1]");
  if (integer_leaf_set.empty()) throw InvalidConfig("integer_leaf_set is empty");
  for (int v : integer_leaf_set)
    if (v < expr::kMinIntegerToken || v > expr::kMaxIntegerToken)
      throw InvalidConfig("integer leaf " + std::to_string(v) + " has no token");
  if (max_skeleton_length < 0) throw InvalidConfig("max_skeleton_length must be >= 0");
}

TreeSampler::TreeSampler(const GeneratorConfig& config) : config_(config) {
  config_.validate();
  double total = 0.0;
  for (const auto& [name, info] : operator_table()) {
    const auto it = config_.operator_weights.find(name);
    if (it == config_.operator_weights.end() || it->second <= 0.0) continue;
    ops_.push_back({name, info.symbol, info.arity, info.subtraction, it->second});
    total += it->second;
    cumulative_.push_back(total);
  }
}

Expression TreeSampler::sample(Rng& rng, std::vector<int>* op_draws) const {
  const int n_ops = config_.max_internal_nodes == 0 ? 0 : static_cast<int>(uniform_int(rng, 1, config_.max_internal_nodes));

  std::vector<Slot> slots(1);
  std::vector<int> holes{0};
  for (int k = 0; k < n_ops; ++k) {
    const auto pick = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(holes.size()) - 1));
    const int h = holes[pick];
    holes[pick] = holes.back();
    holes.pop_back();

    const double u = uniform01(rng) * cumulative_.back();
    const auto op = static_cast<int>(
        std::min<std::size_t>(std::upper_bound(cumulative_.begin(), cumulative_.end(), u) - cumulative_.begin(),
                              ops_.size() - 1));
    if (op_draws) op_draws->push_back(op);
    slots[h].op = op;
    for (int c = 0; c < ops_[op].arity; ++c) {
      const int id = static_cast<int>(slots.size());
      slots.emplace_back();
      slots[h].kids[c] = id;
      if (ops_[op].symbol == Symbol::Pow && c == 1) {
        slots[id].exponent = true;
      } else {
        holes.push_back(id);
      }
    }
  }

  // Fill leaves; exponent leaves are always integers.
  const auto draw_integer = [&] {
    const auto i = uniform_int(rng, 0, static_cast<std::int64_t>(config_.integer_leaf_set.size()) - 1);
    return Node{expr::integer_symbol(config_.integer_leaf_set[static_cast<std::size_t>(i)]), 0.0};
  };
  bool any_variable = false;
  std::vector<int> free_leaves;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    Slot& s = slots[i];
    if (s.op >= 0) continue;
    if (s.exponent) {
      s.leaf = draw_integer();
      continue;
    }
    free_leaves.push_back(static_cast<int>(i));
    if (uniform01(rng) < config_.leaf_variable_prob) {
      s.leaf = Node{expr::variable_symbol(static_cast<int>(uniform_int(rng, 1, expr::kMaxVariables))), 0.0};
      any_variable = true;
    } else {
      s.leaf = draw_integer();
    }
  }
  if (!any_variable) {
    const auto i = uniform_int(rng, 0, static_cast<std::int64_t>(free_leaves.size()) - 1);
    slots[free_leaves[static_cast<std::size_t>(i)]].leaf =
        Node{expr::variable_symbol(static_cast<int>(uniform_int(rng, 1, expr::kMaxVariables))), 0.0};
  }

  const auto build = [&](auto&& self, int id) -> Expression {
    const Slot& s = slots[id];
    if (s.op < 0) return Expression::from_nodes({s.leaf});
    const SamplerOperator& op = ops_[s.op];
    if (op.arity == 1) return Expression::unary(op.symbol, self(self, s.kids[0]));
    Expression lhs = self(self, s.kids[0]);
    Expression rhs = self(self, s.kids[1]);
    if (op.subtraction) return expr::add(lhs, expr::mul(Expression::integer(-1), rhs));
    return Expression::binary(op.symbol, lhs, rhs);
  };
  return expr::relabel_variables(build(build, 0));
}

Expression sample_tree(const GeneratorConfig& config, Rng& rng) { return TreeSampler(config).sample(rng); }

std::optional<expr::Skeleton> to_pool_entry(const Expression& tree, const GeneratorConfig& config) {
  const Expression simplified = expr::relabel_variables(expr::simplify(tree));
  if (simplified.variable_mask() == 0) return std::nullopt;
  expr::Skeleton skel = expr::skeletonize(simplified);
  if (config.max_skeleton_length > 0 && skel.expr.size() > static_cast<std::size_t>(config.max_skeleton_length))
    return std::nullopt;
  return skel;
}

SkeletonPool build_pool(const GeneratorConfig& config, std::size_t count, Rng& rng) {
  if (count < 1) throw InvalidConfig("pool count must be >= 1");
  const TreeSampler sampler(config);
  SkeletonPool pool;
  pool.skeletons.reserve(count);
  while (pool.skeletons.size() < count) {
    if (auto entry = to_pool_entry(sampler.sample(rng), config)) pool.skeletons.push_back(std::move(*entry));
  }
  pool.stats = compute_stats(pool.skeletons);
  return pool;
}

PoolStats compute_stats(const std::vector<expr::Skeleton>& skeletons) {
  PoolStats stats;
  stats.total = skeletons.size();
  std::unordered_map<std::string, std::size_t> seen;
  double length_sum = 0.0;
  for (const auto& s : skeletons) {
    const auto prefix = expr::to_prefix(s.expr);
    std::string key;
    for (auto t : prefix) key += std::to_string(t) + ' ';
    ++seen[key];
    ++stats.length_histogram[s.expr.size()];
    length_sum += static_cast<double>(s.expr.size());
  }
  stats.unique = seen.size();
  stats.mean_length = skeletons.empty() ? 0.0 : length_sum / static_cast<double>(skeletons.size());
  return stats;
}

std::vector<std::pair<std::string, std::size_t>> frequency_table(const std::vector<expr::Skeleton>& skeletons) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : skeletons) ++counts[expr::to_infix(s.expr)];
  std::vector<std::pair<std::string, std::size_t>> out(counts.begin(), counts.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

ProbeSet make_probe_set(Rng& rng) {
  ProbeSet probes;
  for (std::size_t i = 0; i < kProbeCount; ++i) {
    expr::Point p{};
    for (double& v : p) v = uniform(rng, -10.0, 10.0);
    probes.points.push_back(p);
  }
  return probes;
}

ProbeSet make_probe_set(std::uint64_t seed) {
  Rng rng = split_stream(seed, 0x70726f6265ULL);
  return make_probe_set(rng);
}

std::vector<double> numeric_fingerprint(const Expression& e, const ProbeSet& probes) {
  return expr::Evaluator(e).run(probes.points);
}

std::vector<double> numeric_fingerprint(const expr::Skeleton& skel, const ProbeSet& probes) {
  return numeric_fingerprint(expr::instantiate_ones(skel), probes);
}

bool fingerprints_equal(const std::vector<double>& a, const std::vector<double>& b, double rtol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i], y = b[i];
    if (std::isnan(x) || std::isnan(y)) {
      if (std::isnan(x) != std::isnan(y)) return false;
      continue;
    }
    if (std::isinf(x) || std::isinf(y)) {
      if (x != y) return false;
      continue;
    }
    if (std::fabs(x - y) > rtol * std::max(std::fabs(x), std::fabs(y))) return false;
  }
  return true;
}

}  // namespace nsr::datagen
