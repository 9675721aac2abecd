#include <algorithm>
#include <cmath>
#include <vector>

#include "nsr/expr/expression.hpp"

// Fixed rewrite set, applied bottom-up until nothing changes:
//   - numeric folding of +, *, /, ^ over literal operands
//   - x + 0, x * 1, x * 0 -> 0, 0 / x -> 0, x / 1, x / x -> 1, x ^ 1, x ^ 0 -> 1, 1 ^ x -> 1
//   - nested + and * are flattened, like terms collected (x - x -> 0,
//     x + x -> 2 * x, (-1) * ((-1) * x) -> x) and operands put in canonical order.
// Rewrites with singular points (x * 0, x / x, 0 / x) are applied symbolically.

namespace nsr::expr {
namespace {

struct Term {
  Symbol symbol;
  double value = 0.0;
  std::vector<Term> kids;

  bool operator==(const Term&) const = default;
};

Term to_term(const Expression& e, std::size_t& i) {
  const Node& n = e.nodes()[i++];
  Term t{n.symbol, n.value, {}};
  for (int k = 0; k < arity(n.symbol); ++k) t.kids.push_back(to_term(e, i));
  return t;
}

void flatten_into(const Term& t, std::vector<Node>& out) {
  out.push_back(Node{t.symbol, t.value});
  for (const Term& k : t.kids) flatten_into(k, out);
}

Expression to_expression(const Term& t) {
  std::vector<Node> nodes;
  flatten_into(t, nodes);
  return Expression::from_nodes(std::move(nodes));
}

bool is_number(const Term& t) { return is_numeric(t.symbol); }

double number_value(const Term& t) {
  return t.symbol == Symbol::Real ? t.value : static_cast<double>(integer_value(t.symbol));
}

Term make_number(double v) {
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  if (v == std::nearbyint(v) && v >= kMinIntegerToken && v <= kMaxIntegerToken)
    return Term{integer_symbol(static_cast<int>(v)), 0.0, {}};
  return Term{Symbol::Real, v, {}};
}

bool is_number(const Term& t, double v) { return is_number(t) && number_value(t) == v; }

// Total order used to sort commutative operands.
bool canonical_less(const Term& a, const Term& b) {
  std::vector<Node> na, nb;
  flatten_into(a, na);
  flatten_into(b, nb);
  return std::lexicographical_compare(na.begin(), na.end(), nb.begin(), nb.end(),
                                      [](const Node& x, const Node& y) {
                                        if (x.symbol != y.symbol) return x.symbol < y.symbol;
                                        return x.value < y.value;
                                      });
}

void flatten_assoc(Symbol op, Term t, std::vector<Term>& out) {
  if (t.symbol == op) {
    for (Term& k : t.kids) flatten_assoc(op, std::move(k), out);
  } else {
    out.push_back(std::move(t));
  }
}

Term chain(Symbol op, std::vector<Term> operands) {
  Term acc = std::move(operands.back());
  for (std::size_t i = operands.size() - 1; i-- > 0;) acc = Term{op, 0.0, {std::move(operands[i]), std::move(acc)}};
  return acc;
}

Term simplify_sum(Term t) {
  std::vector<Term> terms;
  flatten_assoc(Symbol::Add, std::move(t), terms);

  double constant = 0.0;
  std::vector<Term> numerics;
  // (coefficient, rest) pairs; a canonical product keeps its literal factor first.
  std::vector<std::pair<double, Term>> like;
  for (Term& term : terms) {
    if (is_number(term)) {
      constant += number_value(term);
      numerics.push_back(term);
      continue;
    }
    double coef = 1.0;
    Term rest = std::move(term);
    if (rest.symbol == Symbol::Mul && is_number(rest.kids[0])) {
      coef = number_value(rest.kids[0]);
      Term inner = std::move(rest.kids[1]);
      rest = std::move(inner);
    }
    auto it = std::find_if(like.begin(), like.end(), [&](const auto& p) { return p.second == rest; });
    if (it == like.end()) {
      like.emplace_back(coef, std::move(rest));
    } else {
      it->first += coef;
    }
  }

  std::vector<Term> out;
  for (auto& [coef, rest] : like) {
    if (!std::isfinite(coef)) {
      out.push_back(Term{Symbol::Mul, 0.0, {make_number(1.0), rest}});
      continue;
    }
    if (coef == 0.0) continue;
    if (coef == 1.0) {
      out.push_back(std::move(rest));
    } else {
      out.push_back(Term{Symbol::Mul, 0.0, {make_number(coef), std::move(rest)}});
    }
  }
  std::sort(out.begin(), out.end(), canonical_less);
  if (std::isfinite(constant)) {
    if (constant != 0.0 || out.empty()) out.insert(out.begin(), make_number(constant));
  } else {
    out.insert(out.begin(), numerics.begin(), numerics.end());
  }
  return out.size() == 1 ? std::move(out.front()) : chain(Symbol::Add, std::move(out));
}

Term simplify_product(Term t) {
  std::vector<Term> factors;
  flatten_assoc(Symbol::Mul, std::move(t), factors);

  double product = 1.0;
  std::vector<Term> numerics;
  std::vector<Term> out;
  for (Term& f : factors) {
    if (is_number(f)) {
      product *= number_value(f);
      numerics.push_back(f);
    } else {
      out.push_back(std::move(f));
    }
  }
  std::sort(out.begin(), out.end(), canonical_less);
  if (!std::isfinite(product)) {
    out.insert(out.begin(), numerics.begin(), numerics.end());
  } else if (product == 0.0) {
    return make_number(0.0);
  } else if (product != 1.0 || out.empty()) {
    out.insert(out.begin(), make_number(product));
  }
  return out.size() == 1 ? std::move(out.front()) : chain(Symbol::Mul, std::move(out));
}

Term fold_binary(Symbol op, const Term& a, const Term& b, Term fallback) {
  double v = 0.0;
  const double x = number_value(a), y = number_value(b);
  switch (op) {
    case Symbol::Div: v = x / y; break;
    case Symbol::Pow: v = std::pow(x, y); break;
    default: return fallback;
  }
  return std::isfinite(v) ? make_number(v) : fallback;
}

Term simplify_once(Term t) {
  for (Term& k : t.kids) k = simplify_once(std::move(k));
  switch (t.symbol) {
    case Symbol::Add:
      return simplify_sum(std::move(t));
    case Symbol::Mul:
      return simplify_product(std::move(t));
    case Symbol::Div: {
      const Term& a = t.kids[0];
      const Term& b = t.kids[1];
      if (a == b) return make_number(1.0);
      if (is_number(b, 1.0)) return a;
      if (is_number(a, 0.0)) return make_number(0.0);
      if (is_number(a) && is_number(b)) return fold_binary(Symbol::Div, a, b, t);
      return t;
    }
    case Symbol::Pow: {
      const Term& a = t.kids[0];
      const Term& b = t.kids[1];
      if (is_number(b, 1.0)) return a;
      if (is_number(b, 0.0) || is_number(a, 1.0)) return make_number(1.0);
      if (is_number(a) && is_number(b)) return fold_binary(Symbol::Pow, a, b, t);
      return t;
    }
    default:
      return t;
  }
}

}  // namespace

Expression simplify(const Expression& e) {
  if (e.empty()) return e;
  std::size_t i = 0;
  Term t = to_term(e, i);
  for (int pass = 0; pass < 32; ++pass) {
    Term next = simplify_once(t);
    if (next == t) break;
    t = std::move(next);
  }
  return to_expression(t);
}

}  // namespace nsr::expr
