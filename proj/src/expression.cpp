#include "she/expression.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <vector>

#include "she/errors.hpp"

namespace she {

struct Expression::Node {
  enum class Op { Constant, Variable, Neg, Add, Sub, Mul, Div, Pow, Call1, Call2 };
  Op op = Op::Constant;
  double value = 0.0;
  double (*fn1)(double) = nullptr;
  double (*fn2)(double, double) = nullptr;
  std::shared_ptr<const Node> lhs, rhs;

  double eval(double u) const {
    switch (op) {
      case Op::Constant: return value;
      case Op::Variable: return u;
      case Op::Neg: return -lhs->eval(u);
      case Op::Add: return lhs->eval(u) + rhs->eval(u);
      case Op::Sub: return lhs->eval(u) - rhs->eval(u);
      case Op::Mul: return lhs->eval(u) * rhs->eval(u);
      case Op::Div: return lhs->eval(u) / rhs->eval(u);
      case Op::Pow: return std::pow(lhs->eval(u), rhs->eval(u));
      case Op::Call1: return fn1(lhs->eval(u));
      case Op::Call2: return fn2(lhs->eval(u), rhs->eval(u));
    }
    return 0.0;
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Op = Expression::Node::Op;

NodePtr make(Op op, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
  auto n = std::make_shared<Expression::Node>();
  n->op = op;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}

NodePtr constant(double v) {
  auto n = std::make_shared<Expression::Node>();
  n->value = v;
  return n;
}

double fmin2(double a, double b) { return std::fmin(a, b); }
double fmax2(double a, double b) { return std::fmax(a, b); }
double pow2(double a, double b) { return std::pow(a, b); }

struct Unary {
  const char* name;
  double (*fn)(double);
};
struct Binary {
  const char* name;
  double (*fn)(double, double);
};

const Unary kUnary[] = {
    {"exp", [](double x) { return std::exp(x); }},   {"log", [](double x) { return std::log(x); }},
    {"sqrt", [](double x) { return std::sqrt(x); }}, {"abs", [](double x) { return std::fabs(x); }},
    {"sin", [](double x) { return std::sin(x); }},   {"cos", [](double x) { return std::cos(x); }},
    {"tan", [](double x) { return std::tan(x); }},   {"sinh", [](double x) { return std::sinh(x); }},
    {"cosh", [](double x) { return std::cosh(x); }}, {"tanh", [](double x) { return std::tanh(x); }},
};
const Binary kBinary[] = {{"min", fmin2}, {"max", fmax2}, {"pow", pow2}};

// expr   := term (('+'|'-') term)*
// term   := unary (('*'|'/') unary)*
// unary  := '-' unary | '+' unary | power
// power  := atom ('^' unary)?
// atom   := number | ident | ident '(' args ')' | '(' expr ')'
class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  NodePtr parse() {
    NodePtr e = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ValidationError("expression '" + std::string(s_) + "': " + msg + " at offset " +
                          std::to_string(pos_));
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (accept('+'))
        lhs = make(Op::Add, lhs, term());
      else if (accept('-'))
        lhs = make(Op::Sub, lhs, term());
      else
        return lhs;
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (accept('*'))
        lhs = make(Op::Mul, lhs, unary());
      else if (accept('/'))
        lhs = make(Op::Div, lhs, unary());
      else
        return lhs;
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Op::Neg, unary());
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = atom();
    if (accept('^')) return make(Op::Pow, base, unary());
    return base;
  }

  NodePtr atom() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    if (accept('(')) {
      NodePtr e = expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    fail(std::string("unexpected character '") + c + "'");
  }

  NodePtr number() {
    const std::string rest(s_.substr(pos_));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(rest, &used);
    } catch (const std::exception&) {
      fail("malformed number");
    }
    pos_ += used;
    return constant(v);
  }

  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
      ++pos_;
    const std::string name(s_.substr(start, pos_ - start));
    if (name == "u" || name == "x") return make(Op::Variable);
    if (name == "pi") return constant(std::numbers::pi);
    if (name == "e") return constant(std::numbers::e);
    if (!accept('(')) fail("unknown identifier '" + name + "'");
    for (const auto& f : kUnary) {
      if (name == f.name) {
        auto n = std::make_shared<Expression::Node>();
        n->op = Op::Call1;
        n->fn1 = f.fn;
        n->lhs = expr();
        if (!accept(')')) fail("expected ')' after argument of " + name);
        return n;
      }
    }
    for (const auto& f : kBinary) {
      if (name == f.name) {
        auto n = std::make_shared<Expression::Node>();
        n->op = Op::Call2;
        n->fn2 = f.fn;
        n->lhs = expr();
        if (!accept(',')) fail("expected ',' in " + name);
        n->rhs = expr();
        if (!accept(')')) fail("expected ')' after arguments of " + name);
        return n;
      }
    }
    fail("unknown function '" + name + "'");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression Expression::parse(std::string_view text) {
  Parser p(text);
  return Expression(p.parse(), std::string(text));
}

double Expression::operator()(double u) const { return root_->eval(u); }

}  // namespace she
