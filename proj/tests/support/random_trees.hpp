#pragma once

#include <vector>

#include "nsr/expr/expression.hpp"
#include "nsr/random.hpp"

namespace nsr::testing {

// Random expression trees over the full vocabulary, independent of the
// dataset generator. Leaves mix variables, integer tokens, placeholders and
// (optionally) real constants.
struct TreeOptions {
  int max_depth = 6;
  bool reals = true;
  bool placeholders = true;
};

inline expr::Expression random_tree(Rng& rng, const TreeOptions& opt, int depth = 0) {
  using expr::Symbol;
  static const std::vector<Symbol> unary = {Symbol::Arccos, Symbol::Arcsin, Symbol::Arctan, Symbol::Cos,
                                            Symbol::Cosh,   Symbol::Coth,   Symbol::Exp,    Symbol::Ln,
                                            Symbol::Sin,    Symbol::Sinh,   Symbol::Sqrt,   Symbol::Tan,
                                            Symbol::Tanh};
  static const std::vector<Symbol> binary = {Symbol::Add, Symbol::Mul, Symbol::Div, Symbol::Pow};
  const double stop = depth >= opt.max_depth ? 1.0 : 0.35;
  if (uniform01(rng) < stop) {
    const auto kind = uniform_int(rng, 0, 3);
    if (kind == 0 || kind == 1) return expr::var(static_cast<int>(uniform_int(rng, 1, 3)));
    if (kind == 2) return expr::Expression::integer(static_cast<int>(uniform_int(rng, -3, 5)));
    if (opt.placeholders && uniform01(rng) < 0.5) return expr::ph();
    if (opt.reals) return expr::Expression::real(uniform(rng, -5.0, 5.0));
    return expr::var(1);
  }
  if (uniform01(rng) < 0.4) {
    const Symbol op = unary[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<long>(unary.size()) - 1))];
    return expr::call(op, random_tree(rng, opt, depth + 1));
  }
  const Symbol op = binary[static_cast<std::size_t>(uniform_int(rng, 0, 3))];
  auto lhs = random_tree(rng, opt, depth + 1);
  auto rhs = random_tree(rng, opt, depth + 1);
  return expr::Expression::binary(op, lhs, rhs);
}

}  // namespace nsr::testing
