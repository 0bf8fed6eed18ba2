#pragma once

// Analytic scalar expressions over named coordinates.
//
// An Expression is an immutable tree (in practice a DAG, since subtrees are
// shared) of constants, coordinate variables, unary elementary functions and
// binary arithmetic. Variables carry the index of their coordinate so that
// evaluation works on plain coordinate vectors.

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace equipart {

enum class UnaryOp { Neg, Sin, Cos, Exp, Log, Sqrt, Acos, Atan };
enum class BinaryOp { Add, Sub, Mul, Div, Pow };

const char* to_string(UnaryOp op);
const char* to_string(BinaryOp op);

class Expression {
 public:
  enum class Kind { Constant, Variable, Unary, Binary };

  struct Node;

  // Constant zero.
  Expression();
  Expression(double value);  // NOLINT(google-explicit-constructor)

  static Expression constant(double value);
  static Expression variable(std::string name, std::size_t index);

  // Raw constructors: build exactly the requested node, no rewriting.
  static Expression make_unary(UnaryOp op, Expression operand);
  static Expression make_binary(BinaryOp op, Expression lhs, Expression rhs);

  Kind kind() const;
  bool is_constant() const { return kind() == Kind::Constant; }
  bool is_constant(double value) const;
  bool is_variable() const { return kind() == Kind::Variable; }

  double value() const;              // Constant
  const std::string& name() const;   // Variable
  std::size_t index() const;         // Variable
  UnaryOp unary_op() const;          // Unary
  BinaryOp binary_op() const;        // Binary
  const Expression& operand() const; // Unary
  const Expression& lhs() const;     // Binary
  const Expression& rhs() const;     // Binary

  // Identity of the shared node; used for memoization.
  const Node* id() const { return node_.get(); }

 private:
  explicit Expression(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

struct Expression::Node {
  Kind kind = Kind::Constant;
  double value = 0.0;
  std::string name;
  std::size_t index = 0;
  UnaryOp unary = UnaryOp::Neg;
  BinaryOp binary = BinaryOp::Add;
  Expression a;
  Expression b;
};

// Rewriting constructors. They fold constants and drop the identities
// 0+x, x+0, x-0, 0*x, 1*x, x/1, x^0, x^1, --x, and merge c1*(c2*x).
Expression operator+(const Expression& a, const Expression& b);
Expression operator-(const Expression& a, const Expression& b);
Expression operator*(const Expression& a, const Expression& b);
Expression operator/(const Expression& a, const Expression& b);
Expression operator-(const Expression& a);
Expression pow(const Expression& base, const Expression& exponent);
Expression sin(const Expression& a);
Expression cos(const Expression& a);
Expression exp(const Expression& a);
Expression log(const Expression& a);
Expression sqrt(const Expression& a);
Expression acos(const Expression& a);
Expression atan(const Expression& a);
Expression apply(UnaryOp op, const Expression& a);
Expression apply(BinaryOp op, const Expression& a, const Expression& b);

// Names visible to the parser besides coordinates. Let-bound expressions
// are substituted as shared subtrees.
using LetBindings = std::map<std::string, Expression, std::less<>>;

Expression parse(std::string_view text, std::span<const std::string> vars,
                 const LetBindings& lets = {});

// Exact partial derivative with respect to the coordinate with this index
// (or name). The result is built with the rewriting constructors.
Expression differentiate(const Expression& e, std::size_t var_index);
Expression differentiate(const Expression& e, std::string_view var_name,
                         std::span<const std::string> vars);

// Rebuild bottom-up with the rewriting constructors.
Expression simplify(const Expression& e);

// Tree-order evaluation. `point[i]` is the value of the coordinate with
// index i. Throws DomainError outside the domain of log/sqrt/acos/pow.
double evaluate(const Expression& e, std::span<const double> point);
double evaluate(const Expression& e, const std::map<std::string, double, std::less<>>& point);

// Fully parenthesised rendering that parse() maps back to an
// evaluation-identical tree. Constants print with 17 significant digits.
std::string to_string(const Expression& e);

// Structural equality (same tree shape, ops, constants and variables).
bool structurally_equal(const Expression& a, const Expression& b);

// True if the expression mentions the coordinate with this index.
bool depends_on(const Expression& e, std::size_t var_index);

// Largest variable index used plus one (0 for closed expressions).
std::size_t variable_bound(const Expression& e);

// Number of distinct nodes in the DAG.
std::size_t node_count(const Expression& e);

// Elementary kernels shared by every evaluator so that all paths agree
// bit-for-bit. Integer exponents use repeated multiplication; other
// exponents use exp(b*log(a)) and require a > 0.
double apply_unary(UnaryOp op, double x, const Expression* context = nullptr);
double apply_binary(BinaryOp op, double a, double b, const Expression* context = nullptr);

// A batch of expressions compiled into a flat instruction tape with common
// subexpressions shared. Evaluation yields exactly the values evaluate()
// would produce for each output. Immutable and safe to evaluate from many
// threads; each call uses its own scratch space.
class Program {
 public:
  Program() = default;
  explicit Program(std::span<const Expression> outputs);
  explicit Program(std::initializer_list<Expression> outputs);

  std::size_t output_count() const { return outputs_.size(); }
  std::size_t instruction_count() const { return code_.size(); }

  void evaluate(std::span<const double> point, std::span<double> out) const;
  std::vector<double> evaluate(std::span<const double> point) const;

 private:
  enum class Code : unsigned char { Const, Var, Unary, Binary };
  struct Instr {
    Code code;
    unsigned char op;
    std::size_t a;
    std::size_t b;
    double value;
  };
  void compile(std::span<const Expression> outputs);

  std::vector<Instr> code_;
  std::vector<Expression> sources_;  // node per instruction, for error messages
  std::vector<std::size_t> outputs_;
};

}  // namespace equipart
