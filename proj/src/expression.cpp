#include "pemcloak/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <vector>

namespace pemcloak {

struct Expression::Node {
  enum class Op { kConst, kVarX, kVarY, kAdd, kSub, kMul, kDiv, kPow, kNeg, kExp, kSin, kCos };
  Op op = Op::kConst;
  double value = 0.0;
  std::shared_ptr<const Node> lhs, rhs;

  double eval(double x, double y) const {
    switch (op) {
      case Op::kConst: return value;
      case Op::kVarX: return x;
      case Op::kVarY: return y;
      case Op::kAdd: return lhs->eval(x, y) + rhs->eval(x, y);
      case Op::kSub: return lhs->eval(x, y) - rhs->eval(x, y);
      case Op::kMul: return lhs->eval(x, y) * rhs->eval(x, y);
      case Op::kDiv: return lhs->eval(x, y) / rhs->eval(x, y);
      case Op::kPow: return std::pow(lhs->eval(x, y), rhs->eval(x, y));
      case Op::kNeg: return -lhs->eval(x, y);
      case Op::kExp: return std::exp(lhs->eval(x, y));
      case Op::kSin: return std::sin(lhs->eval(x, y));
      case Op::kCos: return std::cos(lhs->eval(x, y));
    }
    return 0.0;
  }
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;

NodePtr make(Node::Op op, NodePtr lhs = nullptr, NodePtr rhs = nullptr, double value = 0.0) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  n->value = value;
  return n;
}

class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text) {}

  NodePtr run() {
    skip_ws();
    if (pos_ >= text_.size()) fail("empty expression");
    NodePtr e = expr();
    skip_ws();
    if (pos_ < text_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const {
    throw Error(ErrorCode::kParseError,
                message + " (line 1, column " + std::to_string(pos_ + 1) + ")");
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr e = term();
    for (;;) {
      if (accept('+')) {
        e = make(Node::Op::kAdd, e, term());
      } else if (accept('-')) {
        e = make(Node::Op::kSub, e, term());
      } else {
        return e;
      }
    }
  }

  NodePtr term() {
    NodePtr e = unary();
    for (;;) {
      if (accept('*')) {
        e = make(Node::Op::kMul, e, unary());
      } else if (accept('/')) {
        e = make(Node::Op::kDiv, e, unary());
      } else {
        return e;
      }
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Node::Op::kNeg, unary());
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (accept('^')) return make(Node::Op::kPow, base, unary());
    return base;
  }

  NodePtr primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("expected a value");
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::string ident;
      while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) {
        ident += text_[pos_++];
      }
      if (ident == "x") return make(Node::Op::kVarX);
      if (ident == "y") return make(Node::Op::kVarY);
      Node::Op op;
      if (ident == "exp") {
        op = Node::Op::kExp;
      } else if (ident == "sin") {
        op = Node::Op::kSin;
      } else if (ident == "cos") {
        op = Node::Op::kCos;
      } else {
        fail("unknown identifier '" + ident + "'");
      }
      if (!accept('(')) fail("expected '(' after function name");
      NodePtr arg = expr();
      if (!accept(')')) fail("expected ')'");
      return make(op, arg);
    }
    if (accept('(')) {
      NodePtr e = expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  NodePtr number() {
    const char* start = text_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(start, &end);
    if (end == start) fail("malformed number");
    pos_ += static_cast<size_t>(end - start);
    return make(Node::Op::kConst, nullptr, nullptr, v);
  }

  const std::string& text_;
  size_t pos_ = 0;
};

}  // namespace

Expression Expression::parse(const std::string& text) {
  Expression e;
  e.text_ = text;
  e.root_ = Parser(text).run();
  return e;
}

double Expression::operator()(double x, double y) const { return root_->eval(x, y); }

}  // namespace pemcloak
