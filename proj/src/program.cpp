#include <bit>
#include <cstdint>
#include <map>
#include <tuple>
#include <unordered_map>

#include "equipart/error.hpp"
#include "equipart/expr.hpp"

namespace equipart {

namespace {

using Key = std::tuple<int, int, std::size_t, std::size_t, std::uint64_t>;

struct Compiler {
  std::vector<Expression>& sources;
  std::unordered_map<const Expression::Node*, std::size_t> by_node;
  std::map<Key, std::size_t> by_shape;

  struct Pending {
    int code;
    int op;
    std::size_t a;
    std::size_t b;
    double value;
  };
  std::vector<Pending> out;

  std::size_t intern(const Key& key, const Pending& p, const Expression& src) {
    if (auto it = by_shape.find(key); it != by_shape.end()) return it->second;
    out.push_back(p);
    sources.push_back(src);
    by_shape.emplace(key, out.size() - 1);
    return out.size() - 1;
  }

  std::size_t emit(const Expression& e) {
    if (e.id() != nullptr) {
      if (auto it = by_node.find(e.id()); it != by_node.end()) return it->second;
    }
    std::size_t slot = 0;
    switch (e.kind()) {
      case Expression::Kind::Constant: {
        const double v = e.value();
        slot = intern(Key{0, 0, 0, 0, std::bit_cast<std::uint64_t>(v)}, {0, 0, 0, 0, v}, e);
        break;
      }
      case Expression::Kind::Variable:
        slot = intern(Key{1, 0, e.index(), 0, 0}, {1, 0, e.index(), 0, 0.0}, e);
        break;
      case Expression::Kind::Unary: {
        const std::size_t a = emit(e.operand());
        const int op = static_cast<int>(e.unary_op());
        slot = intern(Key{2, op, a, 0, 0}, {2, op, a, 0, 0.0}, e);
        break;
      }
      case Expression::Kind::Binary: {
        const std::size_t a = emit(e.lhs());
        const std::size_t b = emit(e.rhs());
        const int op = static_cast<int>(e.binary_op());
        slot = intern(Key{3, op, a, b, 0}, {3, op, a, b, 0.0}, e);
        break;
      }
    }
    if (e.id() != nullptr) by_node.emplace(e.id(), slot);
    return slot;
  }
};

}  // namespace

Program::Program(std::span<const Expression> outputs) { compile(outputs); }

Program::Program(std::initializer_list<Expression> outputs) {
  compile(std::span<const Expression>(outputs.begin(), outputs.size()));
}

void Program::compile(std::span<const Expression> outputs) {
  Compiler c{sources_, {}, {}, {}};
  outputs_.reserve(outputs.size());
  for (const auto& e : outputs) outputs_.push_back(c.emit(e));
  code_.reserve(c.out.size());
  for (const auto& p : c.out) {
    code_.push_back(Instr{static_cast<Code>(p.code), static_cast<unsigned char>(p.op), p.a, p.b,
                          p.value});
  }
}

void Program::evaluate(std::span<const double> point, std::span<double> out) const {
  if (out.size() < outputs_.size()) throw Error("Program::evaluate: output span too small");
  // Small programs stay on the stack.
  constexpr std::size_t kInline = 256;
  double inline_buf[kInline];
  std::vector<double> heap;
  double* reg = inline_buf;
  if (code_.size() > kInline) {
    heap.resize(code_.size());
    reg = heap.data();
  }
  for (std::size_t i = 0; i < code_.size(); ++i) {
    const Instr& in = code_[i];
    switch (in.code) {
      case Code::Const:
        reg[i] = in.value;
        break;
      case Code::Var:
        if (in.a >= point.size()) {
          throw Error("evaluate: point does not bind `" + sources_[i].name() + "`");
        }
        reg[i] = point[in.a];
        break;
      case Code::Unary:
        reg[i] = apply_unary(static_cast<UnaryOp>(in.op), reg[in.a], &sources_[i]);
        break;
      case Code::Binary:
        reg[i] = apply_binary(static_cast<BinaryOp>(in.op), reg[in.a], reg[in.b], &sources_[i]);
        break;
    }
  }
  for (std::size_t k = 0; k < outputs_.size(); ++k) out[k] = reg[outputs_[k]];
}

std::vector<double> Program::evaluate(std::span<const double> point) const {
  std::vector<double> out(outputs_.size());
  evaluate(point, out);
  return out;
}

}  // namespace equipart
