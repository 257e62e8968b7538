#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>

namespace kolmo {

/// A parsed arithmetic expression over the time variable `s` and the point
/// coordinates `x1`, `x2`, ...  Supported grammar:
///
///   expr    := term (('+'|'-') term)*
///   term    := factor (('*'|'/') factor)*
///   factor  := unary ('^' factor)?                  (right associative)
///   unary   := '-' unary | primary
///   primary := number | 's' | 'x<k>' | '(' expr ')'
///            | 'abs' '(' expr ')' | 'exp' '(' expr ')'
///            | 'smoothpow' '(' expr ',' 'x' ')'
///
/// smoothpow(e, x) evaluates |x|_*^e, the C^2-smoothed power of the full
/// point norm; the exponent expression must be constant.
class Expression {
  public:
    virtual ~Expression() = default;
    virtual double eval(double s, const Eigen::VectorXd& x) const = 0;
};

using ExprPtr = std::shared_ptr<const Expression>;

/// Parses the expression or throws std::invalid_argument with a position
/// and description of the offending token.
ExprPtr parse_expression(const std::string& text);

}  // namespace kolmo
