#include "nsr/gp/program.hpp"

#include <algorithm>
#include <cmath>

#include "nsr/error.hpp"

namespace nsr::gp {

int arity(GpOp op) {
  switch (op) {
    case GpOp::Add:
    case GpOp::Sub:
    case GpOp::Mul:
    case GpOp::Div:
      return 2;
    case GpOp::Var:
    case GpOp::Const:
      return 0;
    default:
      return 1;
  }
}

namespace {

constexpr std::pair<GpOp, const char*> kNames[] = {
    {GpOp::Add, "add"}, {GpOp::Sub, "sub"}, {GpOp::Mul, "mul"}, {GpOp::Div, "div"}, {GpOp::Sqrt, "sqrt"},
    {GpOp::Log, "log"}, {GpOp::Exp, "exp"}, {GpOp::Neg, "neg"}, {GpOp::Inv, "inv"}, {GpOp::Sin, "sin"},
    {GpOp::Cos, "cos"}};

double clamp(double v) {
  if (std::isnan(v)) return 0.0;
  return std::clamp(v, -kMagnitudeCap, kMagnitudeCap);
}

}  // namespace

std::string op_name(GpOp op) {
  for (const auto& [o, n] : kNames)
    if (o == op) return n;
  return op == GpOp::Var ? "var" : "const";
}

GpOp parse_op(const std::string& name) {
  for (const auto& [o, n] : kNames)
    if (name == n) return o;
  throw InvalidConfig("unknown GP function '" + name + "'");
}

std::vector<GpOp> default_function_set() {
  std::vector<GpOp> out;
  for (const auto& [o, n] : kNames) out.push_back(o);
  return out;
}

double apply(GpOp op, double a, double b) {
  switch (op) {
    case GpOp::Add: return clamp(a + b);
    case GpOp::Sub: return clamp(a - b);
    case GpOp::Mul: return clamp(a * b);
    case GpOp::Div: return std::abs(b) < kProtectEps ? 1.0 : clamp(a / b);
    case GpOp::Sqrt: return std::sqrt(std::abs(a));
    case GpOp::Log: return std::abs(a) < kProtectEps ? 0.0 : std::log(std::abs(a));
    case GpOp::Exp: return clamp(std::exp(a));
    case GpOp::Neg: return -a;
    case GpOp::Inv: return std::abs(a) < kProtectEps ? 1.0 : clamp(1.0 / a);
    case GpOp::Sin: return std::sin(a);
    case GpOp::Cos: return std::cos(a);
    default: throw InvalidConfig("apply on a terminal");
  }
}

std::size_t subtree_end(const Program& p, std::size_t start) {
  std::size_t need = 1, i = start;
  while (need > 0) {
    if (i >= p.size()) throw MalformedExpression("GP program ends inside a subtree");
    need += static_cast<std::size_t>(arity(p[i].op));
    --need;
    ++i;
  }
  return i;
}

int depth(const Program& p, std::size_t start) {
  // Stack of remaining child counts; depth is its size when a node is visited.
  std::vector<int> pending;
  int best = 0;
  const std::size_t end = subtree_end(p, start);
  for (std::size_t i = start; i < end; ++i) {
    best = std::max(best, static_cast<int>(pending.size()));
    const int a = arity(p[i].op);
    if (a > 0) {
      pending.push_back(a);
    } else {
      while (!pending.empty() && --pending.back() == 0) pending.pop_back();
    }
  }
  return best;
}

int depth(const Program& p) { return p.empty() ? 0 : depth(p, 0); }

namespace {

void run(const Program& p, std::size_t& i, const expr::Columns& x, std::vector<double>& out) {
  const GpNode& n = p[i++];
  const std::size_t rows = x.size();
  switch (arity(n.op)) {
    case 0:
      if (n.op == GpOp::Var) {
        out.assign(x.x[static_cast<std::size_t>(n.var)].begin(), x.x[static_cast<std::size_t>(n.var)].end());
      } else {
        out.assign(rows, n.value);
      }
      return;
    case 1:
      run(p, i, x, out);
      for (double& v : out) v = apply(n.op, v);
      return;
    default: {
      run(p, i, x, out);
      std::vector<double> rhs;
      run(p, i, x, rhs);
      for (std::size_t r = 0; r < rows; ++r) out[r] = apply(n.op, out[r], rhs[r]);
    }
  }
}

void render(const Program& p, std::size_t& i, std::string& out) {
  const GpNode& n = p[i++];
  if (n.op == GpOp::Var) {
    out += "x" + std::to_string(n.var + 1);
    return;
  }
  if (n.op == GpOp::Const) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", n.value);
    out += buf;
    return;
  }
  out += op_name(n.op) + "(";
  for (int k = 0; k < arity(n.op); ++k) {
    if (k) out += ", ";
    render(p, i, out);
  }
  out += ")";
}

expr::Expression convert(const Program& p, std::size_t& i) {
  const GpNode& n = p[i++];
  using expr::Expression;
  using expr::Symbol;
  switch (n.op) {
    case GpOp::Var:
      if (n.var >= expr::kMaxVariables) throw TooManyVariables("GP program uses x" + std::to_string(n.var + 1));
      return expr::var(n.var + 1);
    case GpOp::Const: return Expression::real(n.value);
    default: break;
  }
  Expression a = convert(p, i);
  switch (n.op) {
    case GpOp::Add: return expr::add(a, convert(p, i));
    case GpOp::Sub: return expr::add(a, expr::mul(Expression::integer(-1), convert(p, i)));
    case GpOp::Mul: return expr::mul(a, convert(p, i));
    case GpOp::Div: return expr::div(a, convert(p, i));
    case GpOp::Sqrt: return expr::call(Symbol::Sqrt, a);
    case GpOp::Log: return expr::call(Symbol::Ln, a);
    case GpOp::Exp: return expr::call(Symbol::Exp, a);
    case GpOp::Neg: return expr::mul(Expression::integer(-1), a);
    case GpOp::Inv: return expr::div(Expression::integer(1), a);
    case GpOp::Sin: return expr::call(Symbol::Sin, a);
    case GpOp::Cos: return expr::call(Symbol::Cos, a);
    default: throw InvalidConfig("unreachable GP op");
  }
}

}  // namespace

std::vector<double> execute(const Program& p, const expr::Columns& x) {
  std::vector<double> out;
  std::size_t i = 0;
  run(p, i, x, out);
  return out;
}

std::string to_string(const Program& p) {
  std::string out;
  std::size_t i = 0;
  if (!p.empty()) render(p, i, out);
  return out;
}

expr::Expression to_expression(const Program& p) {
  std::size_t i = 0;
  return convert(p, i);
}

}  // namespace nsr::gp
