#include "stochlyap/cli/expression.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>

#include "stochlyap/errors.hpp"

namespace stochlyap::cli {

class ExpressionParser {
 public:
  ExpressionParser(std::string_view text, std::size_t state_dim, std::size_t noise_dim, Expression& out)
      : text_(text), state_dim_(state_dim), noise_dim_(noise_dim), out_(out) {}

  void run() {
    parse_sum();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
  }

 private:
  using Op = Expression::Op;

  [[noreturn]] void fail(const std::string& what) const {
    throw InvalidArgument("expression '" + std::string(text_) + "' at column " + std::to_string(pos_ + 1) + ": " +
                          what);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void emit(Op op, std::size_t index = 0, double value = 0.0) {
    out_.code_.push_back({op, index, value});
    switch (op) {
      case Op::Const:
      case Op::State:
      case Op::Noise:
        ++depth_;
        break;
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div:
      case Op::Pow:
        --depth_;
        break;
      default:
        break;
    }
    out_.max_stack_ = std::max(out_.max_stack_, depth_);
  }

  void parse_sum() {
    parse_product();
    while (true) {
      if (accept('+')) {
        parse_product();
        emit(Op::Add);
      } else if (accept('-')) {
        parse_product();
        emit(Op::Sub);
      } else {
        return;
      }
    }
  }

  void parse_product() {
    parse_unary();
    while (true) {
      if (accept('*')) {
        parse_unary();
        emit(Op::Mul);
      } else if (accept('/')) {
        parse_unary();
        emit(Op::Div);
      } else {
        return;
      }
    }
  }

  // Unary minus binds looser than ^, so -x^2 is -(x^2).
  void parse_unary() {
    if (accept('-')) {
      parse_unary();
      emit(Op::Neg);
    } else if (accept('+')) {
      parse_unary();
    } else {
      parse_power();
    }
  }

  void parse_power() {
    parse_primary();
    if (accept('^')) {
      parse_unary();
      emit(Op::Pow);
    }
  }

  void parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      parse_sum();
      if (!accept(')')) fail("expected ')'");
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), value);
      if (ec != std::errc()) fail("malformed number");
      pos_ = static_cast<std::size_t>(ptr - text_.data());
      emit(Op::Const, 0, value);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
      const std::string_view name = text_.substr(start, pos_ - start);
      if (name == "sin" || name == "cos" || name == "exp") {
        if (!accept('(')) fail("expected '(' after " + std::string(name));
        parse_sum();
        if (!accept(')')) fail("expected ')'");
        emit(name == "sin" ? Op::Sin : name == "cos" ? Op::Cos : Op::Exp);
        return;
      }
      if (name == "pi") return emit(Op::Const, 0, std::numbers::pi);
      if (name == "e") return emit(Op::Const, 0, std::numbers::e);
      if (name == "xi") {
        if (noise_dim_ == 0) fail("no noise symbol available");
        return emit(Op::Noise, 0);
      }
      if ((name[0] == 'x' || name[0] == 'w') && name.size() > 1) {
        std::size_t k = 0;
        const auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), k);
        const std::size_t limit = name[0] == 'x' ? state_dim_ : noise_dim_;
        if (ec == std::errc() && ptr == name.data() + name.size() && k >= 1 && k <= limit) {
          return emit(name[0] == 'x' ? Op::State : Op::Noise, k - 1);
        }
      }
      fail("unknown symbol '" + std::string(name) + "'");
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  std::string_view text_;
  std::size_t state_dim_;
  std::size_t noise_dim_;
  Expression& out_;
  std::size_t pos_ = 0;
  std::size_t depth_ = 0;
};

Expression Expression::compile(std::string_view text, std::size_t state_dim, std::size_t noise_dim) {
  Expression expr;
  expr.source_ = std::string(text);
  ExpressionParser(expr.source_, state_dim, noise_dim, expr).run();
  return expr;
}

double Expression::evaluate(std::span<const double> x, std::span<const double> w) const {
  constexpr std::size_t kInline = 32;
  double inline_stack[kInline] = {};
  std::vector<double> heap;
  double* stack = inline_stack;
  if (max_stack_ > kInline) {
    heap.resize(max_stack_);
    stack = heap.data();
  }
  std::size_t top = 0;
  for (const Instr& in : code_) {
    switch (in.op) {
      case Op::Const: stack[top++] = in.value; break;
      case Op::State: stack[top++] = x[in.index]; break;
      case Op::Noise: stack[top++] = w[in.index]; break;
      case Op::Add: --top; stack[top - 1] += stack[top]; break;
      case Op::Sub: --top; stack[top - 1] -= stack[top]; break;
      case Op::Mul: --top; stack[top - 1] *= stack[top]; break;
      case Op::Div: --top; stack[top - 1] /= stack[top]; break;
      case Op::Pow: --top; stack[top - 1] = std::pow(stack[top - 1], stack[top]); break;
      case Op::Neg: stack[top - 1] = -stack[top - 1]; break;
      case Op::Sin: stack[top - 1] = std::sin(stack[top - 1]); break;
      case Op::Cos: stack[top - 1] = std::cos(stack[top - 1]); break;
      case Op::Exp: stack[top - 1] = std::exp(stack[top - 1]); break;
    }
  }
  return stack[0];
}

}  // namespace stochlyap::cli
