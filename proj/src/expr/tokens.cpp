#include "nsr/expr/expression.hpp"

#include <array>

namespace nsr::expr {
namespace {

constexpr std::array<std::string_view, 34> kNames = {
    "<pad>", "<sos>", "<eos>", "x1",   "x2",   "x3",   "C",    "arccos", "+",
    "arcsin", "arctan", "cos", "cosh", "coth", "/",    "exp",  "ln",     "*",
    "^",      "sin",    "sinh", "sqrt", "tan", "tanh", "-3",   "-2",     "-1",
    "0",      "1",      "2",    "3",    "4",   "5",    "<real>"};

}  // namespace

TokenKind kind_of(Symbol s) {
  switch (s) {
    case Symbol::Pad: return TokenKind::Padding;
    case Symbol::Sos: return TokenKind::Sos;
    case Symbol::Eos: return TokenKind::Eos;
    case Symbol::X1:
    case Symbol::X2:
    case Symbol::X3: return TokenKind::Variable;
    case Symbol::Placeholder: return TokenKind::Placeholder;
    case Symbol::Add:
    case Symbol::Div:
    case Symbol::Mul:
    case Symbol::Pow: return TokenKind::BinaryOp;
    case Symbol::Real: return TokenKind::RealConstant;
    default: break;
  }
  return is_integer(s) ? TokenKind::IntegerLiteral : TokenKind::UnaryOp;
}

int arity(Symbol s) {
  switch (kind_of(s)) {
    case TokenKind::UnaryOp: return 1;
    case TokenKind::BinaryOp: return 2;
    default: return 0;
  }
}

bool is_valid_token(TokenId id) { return id >= 0 && id < kVocabularySize; }

std::string_view symbol_name(Symbol s) { return kNames.at(static_cast<std::size_t>(s)); }

}  // namespace nsr::expr
