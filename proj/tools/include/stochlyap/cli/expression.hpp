#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stochlyap::cli {

/// Compiled arithmetic expression over state symbols x1..xn and noise
/// symbols w1..wq (xi is an alias of w1). Supports + - * / ^, unary minus,
/// parentheses, the constants pi and e, and sin, cos, exp.
class Expression {
 public:
  static Expression compile(std::string_view text, std::size_t state_dim, std::size_t noise_dim);

  [[nodiscard]] double evaluate(std::span<const double> x, std::span<const double> w) const;
  [[nodiscard]] const std::string& source() const noexcept { return source_; }

 private:
  enum class Op : unsigned char { Const, State, Noise, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp };
  struct Instr {
    Op op;
    std::size_t index = 0;
    double value = 0.0;
  };

  friend class ExpressionParser;

  std::string source_;
  std::vector<Instr> code_;
  std::size_t max_stack_ = 0;
};

}  // namespace stochlyap::cli
