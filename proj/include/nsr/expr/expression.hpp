#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nsr::expr {

/// Symbol ids. Values 0..32 are the model vocabulary; `Real` marks a
/// real-valued constant leaf, which has no vocabulary token.
enum class Symbol : std::uint8_t {
  Pad = 0,
  Sos = 1,
  Eos = 2,
  X1 = 3,
  X2 = 4,
  X3 = 5,
  Placeholder = 6,
  Arccos = 7,
  Add = 8,
  Arcsin = 9,
  Arctan = 10,
  Cos = 11,
  Cosh = 12,
  Coth = 13,
  Div = 14,
  Exp = 15,
  Ln = 16,
  Mul = 17,
  Pow = 18,
  Sin = 19,
  Sinh = 20,
  Sqrt = 21,
  Tan = 22,
  Tanh = 23,
  IntM3 = 24,
  IntM2 = 25,
  IntM1 = 26,
  Int0 = 27,
  Int1 = 28,
  Int2 = 29,
  Int3 = 30,
  Int4 = 31,
  Int5 = 32,
  Real = 33,
};

using TokenId = int;

inline constexpr int kVocabularySize = 33;
inline constexpr int kMaxVariables = 3;
inline constexpr int kMinIntegerToken = -3;
inline constexpr int kMaxIntegerToken = 5;

enum class TokenKind {
  Padding,
  Sos,
  Eos,
  Variable,
  Placeholder,
  UnaryOp,
  BinaryOp,
  IntegerLiteral,
  RealConstant,
};

TokenKind kind_of(Symbol s);
int arity(Symbol s);
bool is_valid_token(TokenId id);
/// Display name: "x1", "+", "sin", "-3", ...
std::string_view symbol_name(Symbol s);

inline constexpr TokenId token_id(Symbol s) { return static_cast<TokenId>(s); }
inline bool is_variable(Symbol s) { return s >= Symbol::X1 && s <= Symbol::X3; }
inline bool is_integer(Symbol s) { return s >= Symbol::IntM3 && s <= Symbol::Int5; }
inline bool is_numeric(Symbol s) { return is_integer(s) || s == Symbol::Real; }
inline int variable_index(Symbol s) { return static_cast<int>(s) - 2; }  // x1 -> 1
inline Symbol variable_symbol(int index) { return static_cast<Symbol>(index + 2); }
inline int integer_value(Symbol s) { return static_cast<int>(s) - 27; }
inline Symbol integer_symbol(int value) { return static_cast<Symbol>(value + 27); }

struct Node {
  Symbol symbol = Symbol::X1;
  double value = 0.0;  // meaningful for Real leaves only

  bool operator==(const Node&) const = default;
};

/// Immutable expression tree stored as its pre-order node sequence.
class Expression {
 public:
  Expression() = default;

  static Expression variable(int index);
  static Expression integer(int value);
  static Expression real(double value);
  static Expression placeholder();
  /// Numeric leaf: an integer token when `value` is an integer in -3..5,
  /// otherwise a real-constant leaf.
  static Expression number(double value);
  static Expression unary(Symbol op, const Expression& arg);
  static Expression binary(Symbol op, const Expression& lhs, const Expression& rhs);
  /// Validates arity bookkeeping and leaf invariants; throws MalformedExpression.
  static Expression from_nodes(std::vector<Node> nodes);

  bool empty() const { return nodes_.empty(); }
  std::size_t size() const { return nodes_.size(); }
  std::span<const Node> nodes() const { return nodes_; }
  const Node& root() const { return nodes_.front(); }

  /// One past the last node of the subtree rooted at `index`.
  std::size_t subtree_end(std::size_t index) const;
  Expression subtree(std::size_t index) const;
  /// The k-th child of the root.
  Expression child(int k) const;
  /// Copy with the subtree at `index` replaced.
  Expression replace_subtree(std::size_t index, const Expression& with) const;

  int placeholder_count() const;
  int real_count() const;
  /// Bit i set when variable x(i+1) occurs.
  unsigned variable_mask() const;
  int depth() const;

  bool operator==(const Expression& other) const = default;

 private:
  explicit Expression(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}
  std::vector<Node> nodes_;
};

// Convenience builders.
inline Expression var(int index) { return Expression::variable(index); }
inline Expression num(double v) { return Expression::number(v); }
inline Expression ph() { return Expression::placeholder(); }
inline Expression add(const Expression& a, const Expression& b) { return Expression::binary(Symbol::Add, a, b); }
inline Expression mul(const Expression& a, const Expression& b) { return Expression::binary(Symbol::Mul, a, b); }
inline Expression div(const Expression& a, const Expression& b) { return Expression::binary(Symbol::Div, a, b); }
inline Expression pow(const Expression& a, const Expression& b) { return Expression::binary(Symbol::Pow, a, b); }
inline Expression call(Symbol op, const Expression& a) { return Expression::unary(op, a); }

/// Expression whose numeric constants are all placeholders.
struct Skeleton {
  Expression expr;
  int placeholder_count = 0;

  /// Throws MalformedExpression if `e` still has real-constant leaves.
  static Skeleton of(Expression e);
  bool operator==(const Skeleton&) const = default;
};

// --- prefix / infix --------------------------------------------------------

/// Pre-order token ids, without sos/eos framing. Real leaves have no token and
/// are rejected with MalformedExpression.
std::vector<TokenId> to_prefix(const Expression& e);
/// Inverse of to_prefix; throws MalformedExpression on arity underflow,
/// trailing tokens, framing tokens or unknown ids.
Expression parse_prefix(std::span<const TokenId> tokens);

/// Fully parenthesized rendering, placeholders as `C`.
std::string to_infix(const Expression& e);
/// Reads infix text (the to_infix form plus ordinary precedence, unary minus,
/// `pi`, and function aliases). Throws ParseError.
Expression parse_infix(std::string_view text);

// --- evaluation ------------------------------------------------------------

using Point = std::array<double, kMaxVariables>;

/// IEEE semantics: domain violations produce NaN or +-inf. Placeholders are
/// bound to `constants` in pre-order; throws ArityMismatch on a count mismatch.
double evaluate(const Expression& e, const Point& point, std::span<const double> constants = {});

/// Column-oriented point set: x[j][i] is variable j+1 of point i.
struct Columns {
  std::array<std::vector<double>, kMaxVariables> x;
  std::size_t size() const { return x[0].size(); }
  Point row(std::size_t i) const { return {x[0][i], x[1][i], x[2][i]}; }
  void push_back(const Point& p) {
    for (int j = 0; j < kMaxVariables; ++j) x[j].push_back(p[j]);
  }
};

/// Reusable evaluator for many points and constant vectors.
class Evaluator {
 public:
  explicit Evaluator(const Expression& e);
  int placeholder_count() const { return placeholders_; }
  /// out.size() must equal cols.size().
  void run(const Columns& cols, std::span<const double> constants, std::span<double> out) const;
  std::vector<double> run(const Columns& cols, std::span<const double> constants = {}) const;

 private:
  std::vector<Node> reversed_;
  int placeholders_ = 0;
  int max_stack_ = 0;
};

// --- rewriting -------------------------------------------------------------

Expression simplify(const Expression& e);
Skeleton skeletonize(const Expression& e);
/// Multiplies every unary-operator subtree by a placeholder and replaces each
/// variable v by C*v + C.
Skeleton place_constants(const Skeleton& s);
/// Binds placeholders to `values` in pre-order; throws ArityMismatch.
Expression instantiate(const Skeleton& s, std::span<const double> values);
/// Like instantiate, but every placeholder becomes the integer token 1.
Expression instantiate_ones(const Skeleton& s);
std::size_t expr_length(const Skeleton& s);

/// Renames used variables to x1..xk keeping their relative order.
Expression relabel_variables(const Expression& e);
bool respects_variable_order(const Expression& e);

}  // namespace nsr::expr
