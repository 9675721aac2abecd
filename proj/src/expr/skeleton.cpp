#include <string>

#include "nsr/error.hpp"
#include "nsr/expr/expression.hpp"

namespace nsr::expr {
namespace {

Expression place(const Expression& e, std::size_t& i) {
  const Node n = e.nodes()[i++];
  switch (kind_of(n.symbol)) {
    case TokenKind::Variable:
      return add(mul(ph(), Expression::variable(variable_index(n.symbol))), ph());
    case TokenKind::UnaryOp:
      return mul(ph(), Expression::unary(n.symbol, place(e, i)));
    case TokenKind::BinaryOp: {
      Expression lhs = place(e, i);
      Expression rhs = place(e, i);
      return Expression::binary(n.symbol, lhs, rhs);
    }
    default:
      return Expression::from_nodes({n});
  }
}

}  // namespace

Skeleton skeletonize(const Expression& e) {
  std::vector<Node> nodes(e.nodes().begin(), e.nodes().end());
  for (Node& n : nodes)
    if (n.symbol == Symbol::Real) n = Node{Symbol::Placeholder, 0.0};
  return Skeleton::of(Expression::from_nodes(std::move(nodes)));
}

Skeleton place_constants(const Skeleton& s) {
  std::size_t i = 0;
  return Skeleton::of(place(s.expr, i));
}

Expression instantiate(const Skeleton& s, std::span<const double> values) {
  if (static_cast<int>(values.size()) != s.placeholder_count)
    throw ArityMismatch("skeleton has " + std::to_string(s.placeholder_count) + " placeholders, got " +
                        std::to_string(values.size()) + " values");
  std::vector<Node> nodes(s.expr.nodes().begin(), s.expr.nodes().end());
  std::size_t next = 0;
  for (Node& n : nodes)
    if (n.symbol == Symbol::Placeholder) n = Node{Symbol::Real, values[next++]};
  return Expression::from_nodes(std::move(nodes));
}

Expression instantiate_ones(const Skeleton& s) {
  std::vector<Node> nodes(s.expr.nodes().begin(), s.expr.nodes().end());
  for (Node& n : nodes)
    if (n.symbol == Symbol::Placeholder) n = Node{Symbol::Int1, 0.0};
  return Expression::from_nodes(std::move(nodes));
}

std::size_t expr_length(const Skeleton& s) { return s.expr.size(); }

}  // namespace nsr::expr
