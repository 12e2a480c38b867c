#pragma once

// Scalar expressions of (x, y, z): recursive-descent parser, evaluator and printer.
//
// Grammar (lowest to highest precedence):
//   sum     := product (('+' | '-') product)*
//   product := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          right-associative
//   primary := number | 'x' | 'y' | 'z' | 'pi' | 'e' | func '(' sum ')' | '(' sum ')'

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nbm/vec3.hpp"

namespace nbm::expr {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t offset, const std::string& message)
      : std::runtime_error("parse error at offset " + std::to_string(offset) + ": " + message),
        offset_(offset),
        message_(message) {}

  std::size_t offset() const { return offset_; }
  const std::string& message() const { return message_; }

 private:
  std::size_t offset_;
  std::string message_;
};

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Op { Constant, Variable, Negate, Add, Sub, Mul, Div, Pow, Call };
enum class Func { Sin, Cos, Exp, Log, Sqrt, Tanh, Abs };

inline const char* func_name(Func f) {
  switch (f) {
    case Func::Sin: return "sin";
    case Func::Cos: return "cos";
    case Func::Exp: return "exp";
    case Func::Log: return "log";
    case Func::Sqrt: return "sqrt";
    case Func::Tanh: return "tanh";
    case Func::Abs: return "abs";
  }
  return "?";
}

struct Node {
  Op op = Op::Constant;
  double value = 0.0;  // Constant
  int var = 0;         // Variable: 0,1,2 -> x,y,z
  Func func = Func::Sin;
  int lhs = -1;  // child indices into the node table
  int rhs = -1;
  std::size_t offset = 0;  // source position, for diagnostics
};

/// Immutable expression tree. Copies share the node table.
class Expression {
 public:
  Expression() : Expression(constant(0.0)) {}

  static Expression constant(double v) {
    Node n;
    n.op = Op::Constant;
    n.value = v;
    return Expression(std::vector<Node>{n});
  }
  static Expression variable(int axis) {
    if (axis < 0 || axis > 2) throw std::invalid_argument("variable axis must be 0, 1 or 2");
    Node n;
    n.op = Op::Variable;
    n.var = axis;
    return Expression(std::vector<Node>{n});
  }
  static Expression negate(const Expression& a) {
    Node n;
    n.op = Op::Negate;
    return combine(n, &a, nullptr);
  }
  static Expression binary(Op op, const Expression& a, const Expression& b) {
    if (op != Op::Add && op != Op::Sub && op != Op::Mul && op != Op::Div && op != Op::Pow) {
      throw std::invalid_argument("not a binary operator");
    }
    Node n;
    n.op = op;
    return combine(n, &a, &b);
  }
  static Expression call(Func f, const Expression& a) {
    Node n;
    n.op = Op::Call;
    n.func = f;
    return combine(n, &a, nullptr);
  }

  double evaluate(const Vec3& p) const { return eval_node(root(), p); }
  double operator()(const Vec3& p) const { return evaluate(p); }

  /// Fully parenthesized text; constants use 17 significant digits so that
  /// parse(to_string()) evaluates bit-identically.
  std::string to_string() const {
    std::string out;
    print_node(root(), out);
    return out;
  }

  /// True when the tree contains no variables.
  bool is_constant() const {
    for (const auto& n : *nodes_) {
      if (n.op == Op::Variable) return false;
    }
    return true;
  }

  const std::vector<Node>& nodes() const { return *nodes_; }
  int root() const { return static_cast<int>(nodes_->size()) - 1; }

 private:
  friend class Parser;

  explicit Expression(std::vector<Node> nodes)
      : nodes_(std::make_shared<const std::vector<Node>>(std::move(nodes))) {}

  // Children are appended before the parent, so the root is always the last node.
  static Expression combine(Node parent, const Expression* a, const Expression* b) {
    std::vector<Node> out;
    auto append = [&out](const Expression& e) {
      const int base = static_cast<int>(out.size());
      for (Node n : *e.nodes_) {
        if (n.lhs >= 0) n.lhs += base;
        if (n.rhs >= 0) n.rhs += base;
        out.push_back(n);
      }
      return static_cast<int>(out.size()) - 1;
    };
    if (a) parent.lhs = append(*a);
    if (b) parent.rhs = append(*b);
    out.push_back(parent);
    return Expression(std::move(out));
  }

  [[noreturn]] static void domain_error(const Node& n, const char* what, const Vec3& p) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s (node at offset %zu) at point (%.17g, %.17g, %.17g)", what,
                  n.offset, p.x, p.y, p.z);
    throw EvalError(buf);
  }

  double eval_node(int i, const Vec3& p) const {
    const Node& n = (*nodes_)[static_cast<std::size_t>(i)];
    switch (n.op) {
      case Op::Constant: return n.value;
      case Op::Variable: return p[static_cast<std::size_t>(n.var)];
      case Op::Negate: return -eval_node(n.lhs, p);
      case Op::Add: return eval_node(n.lhs, p) + eval_node(n.rhs, p);
      case Op::Sub: return eval_node(n.lhs, p) - eval_node(n.rhs, p);
      case Op::Mul: return eval_node(n.lhs, p) * eval_node(n.rhs, p);
      case Op::Div: {
        const double num = eval_node(n.lhs, p);
        const double den = eval_node(n.rhs, p);
        if (den == 0.0) domain_error(n, "division by zero", p);
        return num / den;
      }
      case Op::Pow: {
        const double base = eval_node(n.lhs, p);
        const double ex = eval_node(n.rhs, p);
        if (base == 0.0 && ex < 0.0) domain_error(n, "zero raised to a negative power", p);
        if (base < 0.0 && std::trunc(ex) != ex) {
          domain_error(n, "negative base raised to a non-integer power", p);
        }
        return std::pow(base, ex);
      }
      case Op::Call: {
        const double a = eval_node(n.lhs, p);
        switch (n.func) {
          case Func::Sin: return std::sin(a);
          case Func::Cos: return std::cos(a);
          case Func::Exp: return std::exp(a);
          case Func::Log:
            if (a <= 0.0) domain_error(n, "log of a non-positive value", p);
            return std::log(a);
          case Func::Sqrt:
            if (a < 0.0) domain_error(n, "sqrt of a negative value", p);
            return std::sqrt(a);
          case Func::Tanh: return std::tanh(a);
          case Func::Abs: return std::fabs(a);
        }
      }
    }
    throw EvalError("corrupt expression node");
  }

  void print_node(int i, std::string& out) const {
    const Node& n = (*nodes_)[static_cast<std::size_t>(i)];
    switch (n.op) {
      case Op::Constant: {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", std::fabs(n.value));
        if (std::signbit(n.value)) {
          out += "(-";
          out += buf;
          out += ')';
        } else {
          out += buf;
        }
        return;
      }
      case Op::Variable: out += "xyz"[n.var]; return;
      case Op::Negate:
        out += "(-";
        print_node(n.lhs, out);
        out += ')';
        return;
      case Op::Call:
        out += func_name(n.func);
        out += '(';
        print_node(n.lhs, out);
        out += ')';
        return;
      default: break;
    }
    const char sym = n.op == Op::Add ? '+' : n.op == Op::Sub ? '-' : n.op == Op::Mul ? '*' : n.op == Op::Div ? '/' : '^';
    out += '(';
    print_node(n.lhs, out);
    out += sym;
    print_node(n.rhs, out);
    out += ')';
  }

  std::shared_ptr<const std::vector<Node>> nodes_;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  Expression run() {
    const int root = sum();
    skip_space();
    if (pos_ < src_.size()) {
      if (src_[pos_] == ')') fail(pos_, "unbalanced ')'");
      fail(pos_, std::string("unexpected character '") + src_[pos_] + "'");
    }
    // The parser appends children first, but sum() may leave the root anywhere; re-root.
    return Expression(reroot(root));
  }

 private:
  [[noreturn]] void fail(std::size_t at, const std::string& msg) { throw ParseError(at, msg); }

  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  int push(Node n) {
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size()) - 1;
  }

  int make(Op op, int lhs, int rhs, std::size_t at) {
    Node n;
    n.op = op;
    n.lhs = lhs;
    n.rhs = rhs;
    n.offset = at;
    return push(n);
  }

  int sum() {
    int lhs = product();
    for (;;) {
      skip_space();
      const std::size_t at = pos_;
      if (accept('+')) {
        lhs = make(Op::Add, lhs, product(), at);
      } else if (accept('-')) {
        lhs = make(Op::Sub, lhs, product(), at);
      } else {
        return lhs;
      }
    }
  }

  int product() {
    int lhs = unary();
    for (;;) {
      skip_space();
      const std::size_t at = pos_;
      if (accept('*')) {
        lhs = make(Op::Mul, lhs, unary(), at);
      } else if (accept('/')) {
        lhs = make(Op::Div, lhs, unary(), at);
      } else {
        return lhs;
      }
    }
  }

  int unary() {
    skip_space();
    const std::size_t at = pos_;
    if (accept('-')) return make(Op::Negate, unary(), -1, at);
    return power();
  }

  int power() {
    const int base = primary();
    skip_space();
    const std::size_t at = pos_;
    if (accept('^')) return make(Op::Pow, base, unary(), at);
    return base;
  }

  int primary() {
    skip_space();
    const std::size_t at = pos_;
    if (pos_ >= src_.size()) fail(at, "expected an operand, found end of input");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      const int inner = sum();
      if (!accept(')')) fail(pos_, "expected ')' to close '(' at offset " + std::to_string(at));
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail(at, std::string("expected an operand, found '") + c + "'");
  }

  int number() {
    const std::size_t at = pos_;
    std::size_t end = pos_;
    auto digits = [&] {
      while (end < src_.size() && std::isdigit(static_cast<unsigned char>(src_[end]))) ++end;
    };
    digits();
    if (end < src_.size() && src_[end] == '.') {
      ++end;
      digits();
    }
    if (end < src_.size() && (src_[end] == 'e' || src_[end] == 'E')) {
      std::size_t exp = end + 1;
      if (exp < src_.size() && (src_[exp] == '+' || src_[exp] == '-')) ++exp;
      if (exp < src_.size() && std::isdigit(static_cast<unsigned char>(src_[exp]))) {
        end = exp;
        digits();
      }
    }
    const std::string text(src_.substr(at, end - at));
    if (text == ".") fail(at, "malformed number");
    char* stop = nullptr;
    const double v = std::strtod(text.c_str(), &stop);
    if (stop != text.c_str() + text.size()) fail(at, "malformed number '" + text + "'");
    pos_ = end;
    Node n;
    n.op = Op::Constant;
    n.value = v;
    n.offset = at;
    return push(n);
  }

  int identifier() {
    const std::size_t at = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
      ++pos_;
    }
    const std::string_view name = src_.substr(at, pos_ - at);
    Node n;
    n.offset = at;
    if (name == "x" || name == "y" || name == "z") {
      n.op = Op::Variable;
      n.var = name[0] - 'x';
      return push(n);
    }
    if (name == "pi" || name == "e") {
      n.op = Op::Constant;
      n.value = name == "pi" ? 3.141592653589793 : 2.718281828459045;
      return push(n);
    }
    static constexpr Func funcs[] = {Func::Sin, Func::Cos, Func::Exp, Func::Log,
                                     Func::Sqrt, Func::Tanh, Func::Abs};
    for (Func f : funcs) {
      if (name == func_name(f)) {
        if (!accept('(')) fail(pos_, "expected '(' after function '" + std::string(name) + "'");
        const int arg = sum();
        if (!accept(')')) fail(pos_, "expected ')' to close call to '" + std::string(name) + "'");
        n.op = Op::Call;
        n.func = f;
        n.lhs = arg;
        return push(n);
      }
    }
    fail(at, "unknown identifier '" + std::string(name) + "'");
  }

  // Emit the subtree at `root` in post-order so children precede parents.
  std::vector<Node> reroot(int root) const {
    std::vector<Node> out;
    out.reserve(nodes_.size());
    struct Rec {
      const std::vector<Node>& in;
      std::vector<Node>& out;
      int operator()(int i) const {
        Node n = in[static_cast<std::size_t>(i)];
        if (n.lhs >= 0) n.lhs = (*this)(n.lhs);
        if (n.rhs >= 0) n.rhs = (*this)(n.rhs);
        out.push_back(n);
        return static_cast<int>(out.size()) - 1;
      }
    };
    Rec{nodes_, out}(root);
    return out;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::vector<Node> nodes_;
};

inline Expression parse(std::string_view source) { return Parser(source).run(); }

}  // namespace nbm::expr
