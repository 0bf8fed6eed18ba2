// Recursive-descent parser for the expression DSL.
//
//   expr  := term (("+" | "-") term)*
//   term  := unary (("*" | "/") unary)*
//   unary := "-" unary | power
//   power := atom ("^" unary)?
//   atom  := number | ident | ident "(" expr ")" | "(" expr ")"
//
// "^" is right-associative and binds tighter than a unary minus on its left,
// so -x^2 is -(x^2) while x^-2 is x^(-2).

#include <cctype>
#include <cstdlib>
#include <optional>

#include "equipart/error.hpp"
#include "equipart/expr.hpp"

namespace equipart {

namespace {

std::optional<UnaryOp> function_named(std::string_view name) {
  if (name == "sin") return UnaryOp::Sin;
  if (name == "cos") return UnaryOp::Cos;
  if (name == "exp") return UnaryOp::Exp;
  if (name == "log") return UnaryOp::Log;
  if (name == "sqrt") return UnaryOp::Sqrt;
  if (name == "acos") return UnaryOp::Acos;
  if (name == "atan") return UnaryOp::Atan;
  return std::nullopt;
}

class Parser {
 public:
  Parser(std::string_view text, std::span<const std::string> vars, const LetBindings& lets)
      : text_(text), vars_(vars), lets_(lets) {}

  Expression parse_all() {
    Expression e = parse_expr();
    skip_space();
    if (pos_ < text_.size()) fail("unexpected input", {"operator", "end of input"});
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what, std::vector<std::string> expected) {
    std::string msg = what;
    if (!expected.empty()) {
      msg += " (expected ";
      for (std::size_t i = 0; i < expected.size(); ++i) {
        if (i) msg += i + 1 == expected.size() ? " or " : ", ";
        msg += expected[i];
      }
      msg += ")";
    }
    throw ParseError(msg, pos_, std::move(expected));
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

  Expression parse_expr() {
    Expression lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = Expression::make_binary(BinaryOp::Add, lhs, parse_term());
      } else if (accept('-')) {
        lhs = Expression::make_binary(BinaryOp::Sub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  Expression parse_term() {
    Expression lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = Expression::make_binary(BinaryOp::Mul, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = Expression::make_binary(BinaryOp::Div, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  Expression parse_unary() {
    if (accept('-')) return Expression::make_unary(UnaryOp::Neg, parse_unary());
    return parse_power();
  }

  Expression parse_power() {
    Expression base = parse_atom();
    if (accept('^')) return Expression::make_binary(BinaryOp::Pow, base, parse_unary());
    return base;
  }

  Expression parse_atom() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of input", {"number", "identifier", "'('", "'-'"});
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expression inner = parse_expr();
      if (!accept(')')) fail("unbalanced parenthesis", {"')'"});
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    fail(std::string("unexpected character '") + c + "'", {"number", "identifier", "'('", "'-'"});
  }

  Expression parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
        ++n;
      }
      return n;
    };
    std::size_t mantissa = digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      mantissa += digits();
    }
    if (mantissa == 0) fail("malformed number", {"digit"});
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (digits() == 0) fail("malformed exponent", {"digit"});
    }
    const std::string literal(text_.substr(start, pos_ - start));
    return Expression::constant(std::strtod(literal.c_str(), nullptr));
  }

  Expression parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    const std::string_view name = text_.substr(start, pos_ - start);
    skip_space();
    const bool call = pos_ < text_.size() && text_[pos_] == '(';

    if (auto fn = function_named(name)) {
      if (!call) {
        pos_ = start;
        fail("function `" + std::string(name) + "` used without an argument", {"'('"});
      }
      ++pos_;
      Expression arg = parse_expr();
      skip_space();
      if (pos_ < text_.size() && text_[pos_] == ',') {
        fail("arity mismatch: `" + std::string(name) + "` takes exactly one argument", {"')'"});
      }
      if (!accept(')')) fail("unbalanced parenthesis", {"')'"});
      return Expression::make_unary(*fn, arg);
    }

    std::optional<Expression> bound;
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      if (vars_[i] == name) {
        bound = Expression::variable(vars_[i], i);
        break;
      }
    }
    if (!bound) {
      if (auto it = lets_.find(name); it != lets_.end()) bound = it->second;
    }
    if (!bound) {
      pos_ = start;
      fail("unknown identifier `" + std::string(name) + "`", {"coordinate", "function", "let name"});
    }
    if (call) {
      fail("arity mismatch: `" + std::string(name) + "` is not a function", {"operator"});
    }
    return *bound;
  }

  std::string_view text_;
  std::span<const std::string> vars_;
  const LetBindings& lets_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression parse(std::string_view text, std::span<const std::string> vars, const LetBindings& lets) {
  return Parser(text, vars, lets).parse_all();
}

}  // namespace equipart
