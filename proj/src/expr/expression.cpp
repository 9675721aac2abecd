#include "nsr/expr/expression.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nsr/error.hpp"

namespace nsr::expr {

Expression Expression::variable(int index) {
  if (index < 1 || index > kMaxVariables)
    throw MalformedExpression("variable index out of range: " + std::to_string(index));
  return Expression({Node{variable_symbol(index), 0.0}});
}

Expression Expression::integer(int value) {
  if (value < kMinIntegerToken || value > kMaxIntegerToken)
    throw MalformedExpression("integer literal outside -3..5: " + std::to_string(value));
  return Expression({Node{integer_symbol(value), 0.0}});
}

Expression Expression::real(double value) {
  if (!std::isfinite(value)) throw MalformedExpression("real constant must be finite");
  return Expression({Node{Symbol::Real, value}});
}

Expression Expression::placeholder() { return Expression({Node{Symbol::Placeholder, 0.0}}); }

Expression Expression::number(double value) {
  if (value == std::nearbyint(value) && value >= kMinIntegerToken && value <= kMaxIntegerToken)
    return integer(static_cast<int>(value));
  return real(value);
}

Expression Expression::unary(Symbol op, const Expression& arg) {
  if (arity(op) != 1) throw MalformedExpression("not a unary operator");
  if (arg.empty()) throw MalformedExpression("empty operand");
  std::vector<Node> nodes;
  nodes.reserve(arg.size() + 1);
  nodes.push_back(Node{op, 0.0});
  nodes.insert(nodes.end(), arg.nodes_.begin(), arg.nodes_.end());
  return Expression(std::move(nodes));
}

Expression Expression::binary(Symbol op, const Expression& lhs, const Expression& rhs) {
  if (arity(op) != 2) throw MalformedExpression("not a binary operator");
  if (lhs.empty() || rhs.empty()) throw MalformedExpression("empty operand");
  std::vector<Node> nodes;
  nodes.reserve(lhs.size() + rhs.size() + 1);
  nodes.push_back(Node{op, 0.0});
  nodes.insert(nodes.end(), lhs.nodes_.begin(), lhs.nodes_.end());
  nodes.insert(nodes.end(), rhs.nodes_.begin(), rhs.nodes_.end());
  return Expression(std::move(nodes));
}

Expression Expression::from_nodes(std::vector<Node> nodes) {
  if (nodes.empty()) throw MalformedExpression("empty expression");
  // Running sum of (arity - 1) must reach -1 exactly at the last node.
  long open = 1;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& n = nodes[i];
    const auto id = static_cast<int>(n.symbol);
    if (id > static_cast<int>(Symbol::Real) || n.symbol == Symbol::Pad || n.symbol == Symbol::Sos ||
        n.symbol == Symbol::Eos)
      throw MalformedExpression("invalid symbol id " + std::to_string(id) + " at position " +
                                std::to_string(i));
    if (n.symbol == Symbol::Real && !std::isfinite(n.value))
      throw MalformedExpression("non-finite real constant");
    if (open == 0) throw MalformedExpression("trailing nodes after position " + std::to_string(i - 1));
    open += arity(n.symbol) - 1;
  }
  if (open != 0) throw MalformedExpression("operator is missing operands");
  for (Node& n : nodes)
    if (n.symbol != Symbol::Real) n.value = 0.0;
  return Expression(std::move(nodes));
}

std::size_t Expression::subtree_end(std::size_t index) const {
  long open = 1;
  std::size_t i = index;
  while (open > 0) {
    open += arity(nodes_[i].symbol) - 1;
    ++i;
  }
  return i;
}

Expression Expression::subtree(std::size_t index) const {
  return Expression(std::vector<Node>(nodes_.begin() + static_cast<long>(index),
                                      nodes_.begin() + static_cast<long>(subtree_end(index))));
}

Expression Expression::child(int k) const {
  if (k < 0 || k >= arity(root().symbol)) throw MalformedExpression("child index out of range");
  std::size_t pos = 1;
  for (int i = 0; i < k; ++i) pos = subtree_end(pos);
  return subtree(pos);
}

Expression Expression::replace_subtree(std::size_t index, const Expression& with) const {
  const std::size_t end = subtree_end(index);
  std::vector<Node> out;
  out.reserve(nodes_.size() - (end - index) + with.size());
  out.insert(out.end(), nodes_.begin(), nodes_.begin() + static_cast<long>(index));
  out.insert(out.end(), with.nodes_.begin(), with.nodes_.end());
  out.insert(out.end(), nodes_.begin() + static_cast<long>(end), nodes_.end());
  return Expression(std::move(out));
}

int Expression::placeholder_count() const {
  return static_cast<int>(std::count_if(nodes_.begin(), nodes_.end(),
                                        [](const Node& n) { return n.symbol == Symbol::Placeholder; }));
}

int Expression::real_count() const {
  return static_cast<int>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.symbol == Symbol::Real; }));
}

unsigned Expression::variable_mask() const {
  unsigned mask = 0;
  for (const Node& n : nodes_)
    if (is_variable(n.symbol)) mask |= 1u << (variable_index(n.symbol) - 1);
  return mask;
}

int Expression::depth() const {
  // Depth of each pending slot, tracked with an explicit stack.
  std::vector<int> pending{1};
  int best = 0;
  for (const Node& n : nodes_) {
    const int d = pending.back();
    pending.pop_back();
    best = std::max(best, d);
    for (int k = 0; k < arity(n.symbol); ++k) pending.push_back(d + 1);
  }
  return best;
}

Skeleton Skeleton::of(Expression e) {
  if (e.real_count() != 0) throw MalformedExpression("skeleton contains real constants");
  const int count = e.placeholder_count();
  return Skeleton{std::move(e), count};
}

std::vector<TokenId> to_prefix(const Expression& e) {
  std::vector<TokenId> out;
  out.reserve(e.size());
  for (const Node& n : e.nodes()) {
    if (n.symbol == Symbol::Real)
      throw MalformedExpression("real constants have no token; skeletonize first");
    out.push_back(token_id(n.symbol));
  }
  return out;
}

Expression parse_prefix(std::span<const TokenId> tokens) {
  if (tokens.empty()) throw MalformedExpression("empty token sequence");
  std::vector<Node> nodes;
  nodes.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const TokenId id = tokens[i];
    if (!is_valid_token(id) || id <= token_id(Symbol::Eos))
      throw MalformedExpression("unexpected token " + std::to_string(id) + " at position " +
                                std::to_string(i));
    nodes.push_back(Node{static_cast<Symbol>(id), 0.0});
  }
  return Expression::from_nodes(std::move(nodes));
}

Expression relabel_variables(const Expression& e) {
  const unsigned mask = e.variable_mask();
  int rename[kMaxVariables + 1] = {0, 0, 0, 0};
  int next = 1;
  for (int v = 1; v <= kMaxVariables; ++v)
    if (mask & (1u << (v - 1))) rename[v] = next++;
  std::vector<Node> nodes(e.nodes().begin(), e.nodes().end());
  for (Node& n : nodes)
    if (is_variable(n.symbol)) n.symbol = variable_symbol(rename[variable_index(n.symbol)]);
  return Expression::from_nodes(std::move(nodes));
}

bool respects_variable_order(const Expression& e) {
  const unsigned mask = e.variable_mask();
  // Valid masks are 0, 0b1, 0b11, 0b111.
  return (mask & (mask + 1)) == 0;
}

}  // namespace nsr::expr
