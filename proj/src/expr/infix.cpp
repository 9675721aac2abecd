#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <string>
#include <unordered_map>

#include "nsr/error.hpp"
#include "nsr/expr/expression.hpp"

namespace nsr::expr {
namespace {

std::string format_real(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, end);
  // Integral reals keep a fraction so they do not read back as integer tokens.
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

std::size_t render(const Expression& e, std::size_t i, std::string& out) {
  const Node& n = e.nodes()[i];
  switch (kind_of(n.symbol)) {
    case TokenKind::RealConstant:
      out += format_real(n.value);
      return i + 1;
    case TokenKind::UnaryOp: {
      out += symbol_name(n.symbol);
      out += '(';
      const std::size_t next = render(e, i + 1, out);
      out += ')';
      return next;
    }
    case TokenKind::BinaryOp: {
      out += '(';
      std::size_t next = render(e, i + 1, out);
      out += ' ';
      out += symbol_name(n.symbol);
      out += ' ';
      next = render(e, next, out);
      out += ')';
      return next;
    }
    default:
      out += symbol_name(n.symbol);
      return i + 1;
  }
}

const std::unordered_map<std::string, Symbol>& function_names() {
  static const std::unordered_map<std::string, Symbol> names = {
      {"sin", Symbol::Sin},       {"cos", Symbol::Cos},       {"tan", Symbol::Tan},
      {"sinh", Symbol::Sinh},     {"cosh", Symbol::Cosh},     {"tanh", Symbol::Tanh},
      {"coth", Symbol::Coth},     {"exp", Symbol::Exp},       {"ln", Symbol::Ln},
      {"log", Symbol::Ln},        {"sqrt", Symbol::Sqrt},     {"arcsin", Symbol::Arcsin},
      {"asin", Symbol::Arcsin},   {"arccos", Symbol::Arccos}, {"acos", Symbol::Arccos},
      {"arctan", Symbol::Arctan}, {"atan", Symbol::Arctan},
  };
  return names;
}

Expression negate(const Expression& e) {
  if (e.size() == 1 && e.root().symbol == Symbol::Real) return Expression::real(-e.root().value);
  if (e.size() == 1 && is_integer(e.root().symbol)) return Expression::number(-integer_value(e.root().symbol));
  return mul(Expression::integer(-1), e);
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expression parse() {
    Expression e = parse_sum();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(what + " at offset " + std::to_string(pos_) + " in \"" + std::string(text_) + "\"");
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expression parse_sum() {
    Expression lhs = parse_product();
    for (;;) {
      if (accept('+')) {
        lhs = add(lhs, parse_product());
      } else if (accept('-')) {
        lhs = add(lhs, negate(parse_product()));
      } else {
        return lhs;
      }
    }
  }

  Expression parse_product() {
    Expression lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = mul(lhs, parse_unary());
      } else if (accept('/')) {
        lhs = div(lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  Expression parse_unary() {
    if (accept('-')) {
      // A minus directly before a literal is part of the literal: "-3 ^ x1" is (-3)^x1.
      if (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
        return parse_power(negate(parse_number()));
      return negate(parse_unary());
    }
    if (accept('+')) return parse_unary();
    return parse_power(parse_primary());
  }

  Expression parse_power(Expression base) {
    if (accept('^')) return pow(base, parse_unary());
    return base;
  }

  Expression parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    if (accept('(')) {
      Expression inner = parse_sum();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) return parse_identifier();
    fail(std::string("unexpected character '") + c + "'");
  }

  Expression parse_number() {
    const std::size_t start = pos_;
    bool integral = true;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '.') {
        integral = false;
        ++pos_;
      } else if ((c == 'e' || c == 'E') && pos_ + 1 < text_.size()) {
        integral = false;
        ++pos_;
        if (text_[pos_] == '+' || text_[pos_] == '-') ++pos_;
      } else {
        break;
      }
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (ec != std::errc() || ptr != text_.data() + pos_) fail("malformed number");
    return integral ? Expression::number(v) : Expression::real(v);
  }

  Expression parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    const std::string name(text_.substr(start, pos_ - start));
    if (name == "x1" || name == "x") return var(1);
    if (name == "x2" || name == "y") return var(2);
    if (name == "x3" || name == "z") return var(3);
    if (name == "C" || name == "c") return ph();
    if (name == "pi") return Expression::real(std::numbers::pi);
    const auto it = function_names().find(name);
    if (it == function_names().end()) fail("unknown identifier '" + name + "'");
    if (!accept('(')) fail("expected '(' after " + name);
    Expression arg = parse_sum();
    if (!accept(')')) fail("expected ')'");
    return call(it->second, arg);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string to_infix(const Expression& e) {
  std::string out;
  if (!e.empty()) render(e, 0, out);
  return out;
}

Expression parse_infix(std::string_view text) { return Parser(text).parse(); }

}  // namespace nsr::expr
