#pragma once

#include <memory>
#include <string>

#include "pemcloak/error.hpp"

namespace pemcloak {

/// Compiled arithmetic expression in the variables x and y.
///
/// Grammar (whitespace ignored):
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := ('+' | '-') unary | power
///   power   := primary ('^' unary)?          -- right associative
///   primary := NUMBER | 'x' | 'y' | IDENT '(' expr ')' | '(' expr ')'
///   IDENT   := exp | sin | cos
/// Throws PARSE_ERROR with the offending column on malformed input.
class Expression {
 public:
  struct Node;

  static Expression parse(const std::string& text);

  double operator()(double x, double y) const;
  const std::string& text() const { return text_; }

 private:
  std::string text_;
  std::shared_ptr<const Node> root_;
};

}  // namespace pemcloak
