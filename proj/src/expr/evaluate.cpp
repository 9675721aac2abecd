#include <algorithm>
#include <cmath>
#include <string>

#include "nsr/error.hpp"
#include "nsr/expr/expression.hpp"

namespace nsr::expr {
namespace {

inline double apply_unary(Symbol op, double a) {
  switch (op) {
    case Symbol::Arccos: return std::acos(a);
    case Symbol::Arcsin: return std::asin(a);
    case Symbol::Arctan: return std::atan(a);
    case Symbol::Cos: return std::cos(a);
    case Symbol::Cosh: return std::cosh(a);
    case Symbol::Coth: return std::cosh(a) / std::sinh(a);
    case Symbol::Exp: return std::exp(a);
    case Symbol::Ln: return std::log(a);
    case Symbol::Sin: return std::sin(a);
    case Symbol::Sinh: return std::sinh(a);
    case Symbol::Sqrt: return std::sqrt(a);
    case Symbol::Tan: return std::tan(a);
    case Symbol::Tanh: return std::tanh(a);
    default: return std::nan("");
  }
}

inline double apply_binary(Symbol op, double a, double b) {
  switch (op) {
    case Symbol::Add: return a + b;
    case Symbol::Mul: return a * b;
    case Symbol::Div: return a / b;
    case Symbol::Pow: return std::pow(a, b);
    default: return std::nan("");
  }
}

inline double leaf_value(const Node& n) {
  return n.symbol == Symbol::Real ? n.value : static_cast<double>(integer_value(n.symbol));
}

}  // namespace

double evaluate(const Expression& e, const Point& point, std::span<const double> constants) {
  Columns cols;
  cols.push_back(point);
  return Evaluator(e).run(cols, constants)[0];
}

Evaluator::Evaluator(const Expression& e) : reversed_(e.nodes().rbegin(), e.nodes().rend()) {
  int depth = 0;
  for (const Node& n : reversed_) {
    if (n.symbol == Symbol::Placeholder) ++placeholders_;
    depth += 1 - arity(n.symbol);
    max_stack_ = std::max(max_stack_, depth);
  }
}

void Evaluator::run(const Columns& cols, std::span<const double> constants, std::span<double> out) const {
  if (static_cast<int>(constants.size()) != placeholders_)
    throw ArityMismatch("expected " + std::to_string(placeholders_) + " constants, got " +
                        std::to_string(constants.size()));
  const std::size_t n = cols.size();
  if (out.size() != n) throw ArityMismatch("output size does not match point count");
  if (n == 0 || reversed_.empty()) return;

  // Stack of value rows, each of length n; top is the last row in use.
  std::vector<double> stack(static_cast<std::size_t>(max_stack_) * n);
  std::size_t top = 0;
  // Walking the reversed pre-order visits placeholders last-to-first.
  std::size_t next_constant = constants.size();
  auto row = [&](std::size_t r) { return stack.data() + r * n; };

  for (const Node& node : reversed_) {
    switch (kind_of(node.symbol)) {
      case TokenKind::Variable: {
        const double* src = cols.x[variable_index(node.symbol) - 1].data();
        std::copy(src, src + n, row(top++));
        break;
      }
      case TokenKind::Placeholder: {
        const double c = constants[--next_constant];
        std::fill(row(top), row(top) + n, c);
        ++top;
        break;
      }
      case TokenKind::IntegerLiteral:
      case TokenKind::RealConstant: {
        const double c = leaf_value(node);
        std::fill(row(top), row(top) + n, c);
        ++top;
        break;
      }
      case TokenKind::UnaryOp: {
        double* a = row(top - 1);
        for (std::size_t i = 0; i < n; ++i) a[i] = apply_unary(node.symbol, a[i]);
        break;
      }
      case TokenKind::BinaryOp: {
        // Pre-order puts the left operand deeper, so after the reversal it is
        // pushed last and sits on top.
        double* lhs = row(top - 1);
        const double* rhs = row(top - 2);
        double* dst = row(top - 2);
        for (std::size_t i = 0; i < n; ++i) dst[i] = apply_binary(node.symbol, lhs[i], rhs[i]);
        --top;
        break;
      }
      default:
        throw MalformedExpression("framing token inside expression");
    }
  }
  std::copy(row(0), row(0) + n, out.begin());
}

std::vector<double> Evaluator::run(const Columns& cols, std::span<const double> constants) const {
  std::vector<double> out(cols.size());
  run(cols, constants, out);
  return out;
}

}  // namespace nsr::expr
