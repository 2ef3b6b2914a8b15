#pragma once

#include <memory>
#include <string>
#include <string_view>

namespace she {

/// Scalar expression in one variable (`u`, alias `x`), parsed from text such as
/// "0.1 + 0.05*exp(-abs(u-1)^2)". Supports + - * / ^, unary minus, the constants
/// pi and e, and the functions exp log sqrt abs sin cos tan sinh cosh tanh,
/// plus the two-argument min max pow.
class Expression {
 public:
  static Expression parse(std::string_view text);

  double operator()(double u) const;
  const std::string& text() const { return text_; }

  struct Node;

 private:
  Expression(std::shared_ptr<const Node> root, std::string text)
      : root_(std::move(root)), text_(std::move(text)) {}

  std::shared_ptr<const Node> root_;
  std::string text_;
};

}  // namespace she
