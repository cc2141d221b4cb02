#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "curvlab/quad.hpp"

namespace curvlab {

/// Compiled arithmetic expression over named real variables.
///
/// Grammar (version 1):
///
///     expr    := term (('+' | '-') term)*
///     term    := unary (('*' | '/') unary)*
///     unary   := ('+' | '-') unary | power
///     power   := primary ('^' unary)?
///     primary := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
///
/// `^` is right-associative and binds tighter than a leading minus, so
/// `-x^2` is `-(x^2)` and `2^-1` is 0.5. Names resolve, in order, to
/// variables, parameters, then the constants `pi` and `e`. Functions: exp,
/// log, sqrt, abs, sin, cos, tan, asin, acos, atan, sinh, cosh, tanh (one
/// argument) and pow (two). Whitespace, including newlines, is ignored.
/// Parse errors throw ParseError with a 1-based line and column.
class Expression {
 public:
  static constexpr int grammar_version = 1;

  static Expression compile(std::string_view text, const std::vector<std::string>& variables,
                            const std::map<std::string, double>& params = {});

  template <class Real>
  Real eval(std::span<const Real> vars) const;

  const std::string& source() const { return source_; }
  /// True when the expression references no variable.
  bool is_constant() const;

  enum class Op : unsigned char {
    Const, Var, Neg, Add, Sub, Mul, Div, Pow,
    Exp, Log, Sqrt, Abs, Sin, Cos, Tan, Asin, Acos, Atan, Sinh, Cosh, Tanh,
  };
  struct Instr {
    Op op;
    int index;  // variable index or constant slot
  };

 private:
  friend class ExpressionParser;
  std::string source_;
  std::vector<Instr> code_;
  std::vector<double> const_d_;
  std::vector<Quad> const_q_;
};

extern template double Expression::eval<double>(std::span<const double>) const;
extern template Quad Expression::eval<Quad>(std::span<const Quad>) const;

}  // namespace curvlab
