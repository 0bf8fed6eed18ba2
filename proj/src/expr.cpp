#include "equipart/expr.hpp"

#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "equipart/error.hpp"

namespace equipart {

ParseError::ParseError(const std::string& message, std::size_t position,
                       std::vector<std::string> expected)
    : Error("parse error at " + std::to_string(position) + ": " + message),
      detail_(message),
      position_(position),
      expected_(std::move(expected)) {}

DomainError::DomainError(const std::string& message, std::string subtree)
    : Error(message + " in `" + subtree + "`"), subtree_(std::move(subtree)) {}

const char* to_string(UnaryOp op) {
  switch (op) {
    case UnaryOp::Neg: return "-";
    case UnaryOp::Sin: return "sin";
    case UnaryOp::Cos: return "cos";
    case UnaryOp::Exp: return "exp";
    case UnaryOp::Log: return "log";
    case UnaryOp::Sqrt: return "sqrt";
    case UnaryOp::Acos: return "acos";
    case UnaryOp::Atan: return "atan";
  }
  return "?";
}

const char* to_string(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Pow: return "^";
  }
  return "?";
}

// A null node is the constant zero, so default-constructed children cost
// nothing.
Expression::Expression() = default;

Expression::Expression(double value) : Expression(constant(value)) {}

Expression Expression::constant(double value) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Constant;
  n->value = value;
  return Expression(std::move(n));
}

Expression Expression::variable(std::string name, std::size_t index) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Variable;
  n->name = std::move(name);
  n->index = index;
  return Expression(std::move(n));
}

Expression Expression::make_unary(UnaryOp op, Expression operand) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Unary;
  n->unary = op;
  n->a = std::move(operand);
  return Expression(std::move(n));
}

Expression Expression::make_binary(BinaryOp op, Expression lhs, Expression rhs) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Binary;
  n->binary = op;
  n->a = std::move(lhs);
  n->b = std::move(rhs);
  return Expression(std::move(n));
}

Expression::Kind Expression::kind() const { return node_ ? node_->kind : Kind::Constant; }

bool Expression::is_constant(double v) const { return is_constant() && value() == v; }

double Expression::value() const { return node_ ? node_->value : 0.0; }
const std::string& Expression::name() const { return node_->name; }
std::size_t Expression::index() const { return node_->index; }
UnaryOp Expression::unary_op() const { return node_->unary; }
BinaryOp Expression::binary_op() const { return node_->binary; }
const Expression& Expression::operand() const { return node_->a; }
const Expression& Expression::lhs() const { return node_->a; }
const Expression& Expression::rhs() const { return node_->b; }

// ---------------------------------------------------------------------------
// Numeric kernels

namespace {

bool integral_exponent(double b) {
  return std::isfinite(b) && std::nearbyint(b) == b && std::fabs(b) <= 1024.0;
}

double integer_power(double a, long n) {
  const bool invert = n < 0;
  unsigned long m = invert ? static_cast<unsigned long>(-n) : static_cast<unsigned long>(n);
  double r = 1.0;
  for (unsigned long i = 0; i < m; ++i) r *= a;
  return invert ? 1.0 / r : r;
}

[[noreturn]] void domain_fail(const char* what, const Expression* context) {
  throw DomainError(what, context ? to_string(*context) : std::string("?"));
}

}  // namespace

double apply_unary(UnaryOp op, double x, const Expression* context) {
  switch (op) {
    case UnaryOp::Neg: return -x;
    case UnaryOp::Sin: return std::sin(x);
    case UnaryOp::Cos: return std::cos(x);
    case UnaryOp::Exp: return std::exp(x);
    case UnaryOp::Log:
      if (!(x > 0.0)) domain_fail("log of nonpositive value", context);
      return std::log(x);
    case UnaryOp::Sqrt:
      if (!(x >= 0.0)) domain_fail("sqrt of negative value", context);
      return std::sqrt(x);
    case UnaryOp::Acos:
      if (!(x >= -1.0 && x <= 1.0)) domain_fail("acos argument outside [-1, 1]", context);
      return std::acos(x);
    case UnaryOp::Atan: return std::atan(x);
  }
  return 0.0;
}

double apply_binary(BinaryOp op, double a, double b, const Expression* context) {
  switch (op) {
    case BinaryOp::Add: return a + b;
    case BinaryOp::Sub: return a - b;
    case BinaryOp::Mul: return a * b;
    case BinaryOp::Div: return a / b;
    case BinaryOp::Pow:
      if (integral_exponent(b)) return integer_power(a, static_cast<long>(b));
      if (!(a > 0.0)) domain_fail("non-integer power of nonpositive base", context);
      return std::exp(b * std::log(a));
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Rewriting constructors

namespace {

bool foldable_unary(UnaryOp op, double x) {
  switch (op) {
    case UnaryOp::Log: return x > 0.0;
    case UnaryOp::Sqrt: return x >= 0.0;
    case UnaryOp::Acos: return x >= -1.0 && x <= 1.0;
    default: return true;
  }
}

}  // namespace

Expression apply(UnaryOp op, const Expression& a) {
  if (a.is_constant() && foldable_unary(op, a.value())) {
    return Expression::constant(apply_unary(op, a.value()));
  }
  if (op == UnaryOp::Neg && a.kind() == Expression::Kind::Unary && a.unary_op() == UnaryOp::Neg) {
    return a.operand();
  }
  return Expression::make_unary(op, a);
}

Expression apply(BinaryOp op, const Expression& a, const Expression& b) {
  const bool ca = a.is_constant();
  const bool cb = b.is_constant();
  if (ca && cb) {
    if (op != BinaryOp::Pow || integral_exponent(b.value()) || a.value() > 0.0) {
      return Expression::constant(apply_binary(op, a.value(), b.value()));
    }
  }
  switch (op) {
    case BinaryOp::Add:
      if (a.is_constant(0.0)) return b;
      if (b.is_constant(0.0)) return a;
      break;
    case BinaryOp::Sub:
      if (b.is_constant(0.0)) return a;
      if (a.is_constant(0.0)) return apply(UnaryOp::Neg, b);
      if (a.id() == b.id()) return Expression::constant(0.0);
      break;
    case BinaryOp::Mul: {
      if (cb && !ca) return apply(BinaryOp::Mul, b, a);  // constant to the left
      if (a.is_constant(0.0)) return Expression::constant(0.0);
      if (a.is_constant(1.0)) return b;
      if (a.is_constant(-1.0)) return apply(UnaryOp::Neg, b);
      if (ca && b.kind() == Expression::Kind::Binary && b.binary_op() == BinaryOp::Mul &&
          b.lhs().is_constant()) {
        return apply(BinaryOp::Mul, Expression::constant(a.value() * b.lhs().value()), b.rhs());
      }
      break;
    }
    case BinaryOp::Div:
      if (b.is_constant(1.0)) return a;
      if (a.is_constant(0.0)) return Expression::constant(0.0);
      break;
    case BinaryOp::Pow:
      if (b.is_constant(0.0)) return Expression::constant(1.0);
      if (b.is_constant(1.0)) return a;
      break;
  }
  return Expression::make_binary(op, a, b);
}

Expression operator+(const Expression& a, const Expression& b) { return apply(BinaryOp::Add, a, b); }
Expression operator-(const Expression& a, const Expression& b) { return apply(BinaryOp::Sub, a, b); }
Expression operator*(const Expression& a, const Expression& b) { return apply(BinaryOp::Mul, a, b); }
Expression operator/(const Expression& a, const Expression& b) { return apply(BinaryOp::Div, a, b); }
Expression operator-(const Expression& a) { return apply(UnaryOp::Neg, a); }
Expression pow(const Expression& base, const Expression& exponent) {
  return apply(BinaryOp::Pow, base, exponent);
}
Expression sin(const Expression& a) { return apply(UnaryOp::Sin, a); }
Expression cos(const Expression& a) { return apply(UnaryOp::Cos, a); }
Expression exp(const Expression& a) { return apply(UnaryOp::Exp, a); }
Expression log(const Expression& a) { return apply(UnaryOp::Log, a); }
Expression sqrt(const Expression& a) { return apply(UnaryOp::Sqrt, a); }
Expression acos(const Expression& a) { return apply(UnaryOp::Acos, a); }
Expression atan(const Expression& a) { return apply(UnaryOp::Atan, a); }

// ---------------------------------------------------------------------------
// Differentiation and simplification

namespace {

using Memo = std::unordered_map<const Expression::Node*, Expression>;

Expression derive(const Expression& e, std::size_t v, Memo& memo) {
  if (e.kind() == Expression::Kind::Constant) return Expression::constant(0.0);
  if (auto it = memo.find(e.id()); it != memo.end()) return it->second;

  Expression d;
  switch (e.kind()) {
    case Expression::Kind::Constant:
      break;
    case Expression::Kind::Variable:
      d = Expression::constant(e.index() == v ? 1.0 : 0.0);
      break;
    case Expression::Kind::Unary: {
      const Expression& u = e.operand();
      const Expression du = derive(u, v, memo);
      if (du.is_constant(0.0)) {
        d = Expression::constant(0.0);
        break;
      }
      switch (e.unary_op()) {
        case UnaryOp::Neg: d = -du; break;
        case UnaryOp::Sin: d = cos(u) * du; break;
        case UnaryOp::Cos: d = -(sin(u) * du); break;
        case UnaryOp::Exp: d = e * du; break;
        case UnaryOp::Log: d = du / u; break;
        case UnaryOp::Sqrt: d = du / (Expression(2.0) * e); break;
        case UnaryOp::Acos: d = -(du / sqrt(Expression(1.0) - u * u)); break;
        case UnaryOp::Atan: d = du / (Expression(1.0) + u * u); break;
      }
      break;
    }
    case Expression::Kind::Binary: {
      const Expression& a = e.lhs();
      const Expression& b = e.rhs();
      const Expression da = derive(a, v, memo);
      const Expression db = derive(b, v, memo);
      switch (e.binary_op()) {
        case BinaryOp::Add: d = da + db; break;
        case BinaryOp::Sub: d = da - db; break;
        case BinaryOp::Mul: d = da * b + a * db; break;
        case BinaryOp::Div:
          // (a/b)' = (a' b - a b') / b^2
          d = (da * b - a * db) / (b * b);
          break;
        case BinaryOp::Pow:
          if (b.is_constant()) {
            d = (b * pow(a, Expression(b.value() - 1.0))) * da;
          } else {
            d = e * (db * log(a) + (b * da) / a);
          }
          break;
      }
      break;
    }
  }
  memo.emplace(e.id(), d);
  return d;
}

Expression rebuild(const Expression& e, Memo& memo) {
  if (e.kind() == Expression::Kind::Constant || e.kind() == Expression::Kind::Variable) return e;
  if (auto it = memo.find(e.id()); it != memo.end()) return it->second;
  Expression r;
  if (e.kind() == Expression::Kind::Unary) {
    r = apply(e.unary_op(), rebuild(e.operand(), memo));
  } else {
    r = apply(e.binary_op(), rebuild(e.lhs(), memo), rebuild(e.rhs(), memo));
  }
  memo.emplace(e.id(), r);
  return r;
}

}  // namespace

Expression differentiate(const Expression& e, std::size_t var_index) {
  Memo memo;
  return derive(e, var_index, memo);
}

Expression differentiate(const Expression& e, std::string_view var_name,
                         std::span<const std::string> vars) {
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (vars[i] == var_name) return differentiate(e, i);
  }
  throw Error("differentiate: unknown variable `" + std::string(var_name) + "`");
}

Expression simplify(const Expression& e) {
  Memo memo;
  return rebuild(e, memo);
}

// ---------------------------------------------------------------------------
// Evaluation

double evaluate(const Expression& e, std::span<const double> point) {
  switch (e.kind()) {
    case Expression::Kind::Constant:
      return e.value();
    case Expression::Kind::Variable:
      if (e.index() >= point.size()) {
        throw Error("evaluate: point does not bind `" + e.name() + "`");
      }
      return point[e.index()];
    case Expression::Kind::Unary:
      return apply_unary(e.unary_op(), evaluate(e.operand(), point), &e);
    case Expression::Kind::Binary: {
      const double a = evaluate(e.lhs(), point);
      const double b = evaluate(e.rhs(), point);
      return apply_binary(e.binary_op(), a, b, &e);
    }
  }
  return 0.0;
}

namespace {

double evaluate_named(const Expression& e, const std::map<std::string, double, std::less<>>& point) {
  switch (e.kind()) {
    case Expression::Kind::Constant:
      return e.value();
    case Expression::Kind::Variable: {
      auto it = point.find(e.name());
      if (it == point.end()) throw Error("evaluate: point does not bind `" + e.name() + "`");
      return it->second;
    }
    case Expression::Kind::Unary:
      return apply_unary(e.unary_op(), evaluate_named(e.operand(), point), &e);
    case Expression::Kind::Binary: {
      const double a = evaluate_named(e.lhs(), point);
      const double b = evaluate_named(e.rhs(), point);
      return apply_binary(e.binary_op(), a, b, &e);
    }
  }
  return 0.0;
}

}  // namespace

double evaluate(const Expression& e, const std::map<std::string, double, std::less<>>& point) {
  return evaluate_named(e, point);
}

// ---------------------------------------------------------------------------
// Printing and structural queries

namespace {

std::string format_constant(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", std::fabs(v));
  std::string s(buf);
  // The grammar has no literal for inf/nan; they cannot come out of parse().
  if (std::signbit(v)) return "(-" + s + ")";
  return s;
}

void print(const Expression& e, std::string& out) {
  switch (e.kind()) {
    case Expression::Kind::Constant:
      out += format_constant(e.value());
      return;
    case Expression::Kind::Variable:
      out += e.name();
      return;
    case Expression::Kind::Unary:
      if (e.unary_op() == UnaryOp::Neg) {
        out += "(-";
        print(e.operand(), out);
        out += ")";
      } else {
        out += to_string(e.unary_op());
        out += "(";
        print(e.operand(), out);
        out += ")";
      }
      return;
    case Expression::Kind::Binary:
      out += "(";
      print(e.lhs(), out);
      out += to_string(e.binary_op());
      print(e.rhs(), out);
      out += ")";
      return;
  }
}

}  // namespace

std::string to_string(const Expression& e) {
  std::string out;
  print(e, out);
  return out;
}

bool structurally_equal(const Expression& a, const Expression& b) {
  if (a.id() == b.id()) return true;
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case Expression::Kind::Constant: {
      const double x = a.value();
      const double y = b.value();
      return x == y && std::signbit(x) == std::signbit(y);
    }
    case Expression::Kind::Variable:
      return a.index() == b.index() && a.name() == b.name();
    case Expression::Kind::Unary:
      return a.unary_op() == b.unary_op() && structurally_equal(a.operand(), b.operand());
    case Expression::Kind::Binary:
      return a.binary_op() == b.binary_op() && structurally_equal(a.lhs(), b.lhs()) &&
             structurally_equal(a.rhs(), b.rhs());
  }
  return false;
}

namespace {

template <typename Visit>
void walk_dag(const Expression& e, std::unordered_map<const Expression::Node*, bool>& seen,
              Visit&& visit) {
  if (e.id() != nullptr) {
    if (seen.count(e.id())) return;
    seen.emplace(e.id(), true);
  }
  visit(e);
  if (e.kind() == Expression::Kind::Unary) walk_dag(e.operand(), seen, visit);
  if (e.kind() == Expression::Kind::Binary) {
    walk_dag(e.lhs(), seen, visit);
    walk_dag(e.rhs(), seen, visit);
  }
}

}  // namespace

bool depends_on(const Expression& e, std::size_t var_index) {
  bool found = false;
  std::unordered_map<const Expression::Node*, bool> seen;
  walk_dag(e, seen, [&](const Expression& n) {
    if (n.is_variable() && n.index() == var_index) found = true;
  });
  return found;
}

std::size_t variable_bound(const Expression& e) {
  std::size_t bound = 0;
  std::unordered_map<const Expression::Node*, bool> seen;
  walk_dag(e, seen, [&](const Expression& n) {
    if (n.is_variable()) bound = std::max(bound, n.index() + 1);
  });
  return bound;
}

std::size_t node_count(const Expression& e) {
  std::size_t count = 0;
  std::unordered_map<const Expression::Node*, bool> seen;
  walk_dag(e, seen, [&](const Expression&) { ++count; });
  return count;
}

}  // namespace equipart
