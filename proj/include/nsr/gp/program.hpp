#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nsr/expr/expression.hpp"

namespace nsr::gp {

enum class GpOp : std::uint8_t { Add, Sub, Mul, Div, Sqrt, Log, Exp, Neg, Inv, Sin, Cos, Var, Const };

struct GpNode {
  GpOp op = GpOp::Const;
  int var = 0;  // Var: 0-based column
  double value = 0.0;  // Const
  bool operator==(const GpNode&) const = default;
};

/// Pre-order node list.
using Program = std::vector<GpNode>;

int arity(GpOp op);
std::string op_name(GpOp op);
/// add sub mul div sqrt log exp neg inv sin cos
GpOp parse_op(const std::string& name);
std::vector<GpOp> default_function_set();

/// Magnitude bound for every protected result.
inline constexpr double kMagnitudeCap = 1e300;
/// Closeness threshold for protected division, inversion and log.
inline constexpr double kProtectEps = 1e-6;

/// Protected semantics: a/b and inv(a) give 1 when the denominator is within
/// kProtectEps of 0; sqrt and log take |a|, log is 0 near 0; every result is
/// clamped to +-kMagnitudeCap. Finite inputs always give finite outputs.
double apply(GpOp op, double a, double b = 0.0);

/// Index one past the subtree rooted at `start`.
std::size_t subtree_end(const Program& p, std::size_t start);
/// Edges on the longest root-to-leaf path (a single terminal has depth 0).
int depth(const Program& p);
int depth(const Program& p, std::size_t start);

/// Evaluates on every row of `x` with the protected operators.
std::vector<double> execute(const Program& p, const expr::Columns& x);

std::string to_string(const Program& p);

/// Plain-operator expression (sub -> a + (-1)*b, neg -> (-1)*a, inv -> 1/a).
/// The protection is dropped, so the result can differ where a protected
/// branch was taken. Throws TooManyVariables for columns beyond x3.
expr::Expression to_expression(const Program& p);

}  // namespace nsr::gp
