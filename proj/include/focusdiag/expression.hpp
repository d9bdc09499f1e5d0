#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "value.hpp"

namespace focusdiag {

// Small expression language for branch guards and outputs:
//   literals (integers, reals, true/false, 'symbol'), port names,
//   == != < > <= >=, and or not, + - * /, parentheses.
// Evaluation is three-valued: an unknown port yields an unknown result, except
// that `false and x` is false and `true or x` is true.

enum class ExprOp { Literal, Port, Not, Neg, And, Or, Eq, Ne, Lt, Gt, Le, Ge, Add, Sub, Mul, Div };

struct ExprNode {
  ExprOp op = ExprOp::Literal;
  Value literal;
  std::size_t port = 0;
  std::unique_ptr<ExprNode> lhs;
  std::unique_ptr<ExprNode> rhs;
};

struct EvalContext {
  double tolerance = 0.0;  // used by == and != when a real is involved
};

using PartialInputs = std::span<const std::optional<Value>>;

class Expr {
 public:
  Expr() = default;

  /// Parses `text` over the given port names. Throws Error(Syntax) with a
  /// 1-based column on failure.
  static Expr parse(const std::string& text, const std::vector<std::string>& ports);

  static Expr constant(Value v) {
    auto node = std::make_shared<ExprNode>();
    node->literal = std::move(v);
    Expr e;
    e.root_ = std::move(node);
    e.text_ = e.root_->literal.kind() == ValueKind::Enum ? "'" + e.root_->literal.to_string() + "'"
                                                         : e.root_->literal.to_string();
    return e;
  }

  bool empty() const { return root_ == nullptr; }
  const std::string& text() const { return text_; }

  std::optional<Value> evaluate(PartialInputs inputs, const EvalContext& ctx = {}) const {
    if (!root_) return Value::boolean(true);
    return eval(*root_, inputs, ctx);
  }

  /// Port indices mentioned anywhere in the expression, sorted and unique.
  std::vector<std::size_t> ports() const {
    std::vector<std::size_t> out;
    if (root_) collect(*root_, out);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  static void collect(const ExprNode& n, std::vector<std::size_t>& out) {
    if (n.op == ExprOp::Port) out.push_back(n.port);
    if (n.lhs) collect(*n.lhs, out);
    if (n.rhs) collect(*n.rhs, out);
  }


 public:
  /// Condition view of a value: Booleans as-is, numbers by non-zero test.
  static bool is_true(const Value& v) {
    switch (v.kind()) {
      case ValueKind::Boolean: return v.as_bool();
      case ValueKind::Integer: return v.as_int() != 0;
      case ValueKind::Real: return v.as_real() != 0.0;
      case ValueKind::Enum: break;
    }
    throw Error(ErrorCode::Evaluation, "enum value '" + v.as_symbol() + "' used as a condition");
  }

 private:
  static std::optional<Value> eval(const ExprNode& n, PartialInputs in, const EvalContext& ctx);
  static Value arithmetic(ExprOp op, const Value& a, const Value& b);
  static Value compare(ExprOp op, const Value& a, const Value& b, const EvalContext& ctx);

  std::shared_ptr<const ExprNode> root_;
  std::string text_;
};

namespace detail {

class ExprParser {
 public:
  ExprParser(const std::string& text, const std::vector<std::string>& ports)
      : text_(text), ports_(ports) {}

  std::unique_ptr<ExprNode> parse() {
    auto node = parse_or();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return node;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::Syntax, "expression '" + text_ + "' column " +
                                       std::to_string(pos_ + 1) + ": " + what);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool peek_word(const char* word) {
    skip_space();
    std::size_t len = std::char_traits<char>::length(word);
    if (text_.compare(pos_, len, word) != 0) return false;
    std::size_t end = pos_ + len;
    return end >= text_.size() || !(std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '_');
  }

  bool accept_word(const char* word) {
    if (!peek_word(word)) return false;
    pos_ += std::char_traits<char>::length(word);
    return true;
  }

  bool accept(const char* sym) {
    skip_space();
    std::size_t len = std::char_traits<char>::length(sym);
    if (text_.compare(pos_, len, sym) != 0) return false;
    pos_ += len;
    return true;
  }

  static std::unique_ptr<ExprNode> make(ExprOp op, std::unique_ptr<ExprNode> l,
                                        std::unique_ptr<ExprNode> r = nullptr) {
    auto n = std::make_unique<ExprNode>();
    n->op = op;
    n->lhs = std::move(l);
    n->rhs = std::move(r);
    return n;
  }

  std::unique_ptr<ExprNode> parse_or() {
    auto lhs = parse_and();
    while (accept_word("or")) lhs = make(ExprOp::Or, std::move(lhs), parse_and());
    return lhs;
  }

  std::unique_ptr<ExprNode> parse_and() {
    auto lhs = parse_not();
    while (accept_word("and")) lhs = make(ExprOp::And, std::move(lhs), parse_not());
    return lhs;
  }

  std::unique_ptr<ExprNode> parse_not() {
    if (accept_word("not")) return make(ExprOp::Not, parse_not());
    return parse_comparison();
  }

  std::unique_ptr<ExprNode> parse_comparison() {
    auto lhs = parse_additive();
    struct { const char* sym; ExprOp op; } const table[] = {
        {"==", ExprOp::Eq}, {"!=", ExprOp::Ne}, {"<=", ExprOp::Le},
        {">=", ExprOp::Ge}, {"<", ExprOp::Lt},  {">", ExprOp::Gt}};
    for (const auto& entry : table) {
      if (accept(entry.sym)) return make(entry.op, std::move(lhs), parse_additive());
    }
    return lhs;
  }

  std::unique_ptr<ExprNode> parse_additive() {
    auto lhs = parse_multiplicative();
    for (;;) {
      if (accept("+")) lhs = make(ExprOp::Add, std::move(lhs), parse_multiplicative());
      else if (accept("-")) lhs = make(ExprOp::Sub, std::move(lhs), parse_multiplicative());
      else return lhs;
    }
  }

  std::unique_ptr<ExprNode> parse_multiplicative() {
    auto lhs = parse_unary();
    for (;;) {
      if (accept("*")) lhs = make(ExprOp::Mul, std::move(lhs), parse_unary());
      else if (accept("/")) lhs = make(ExprOp::Div, std::move(lhs), parse_unary());
      else return lhs;
    }
  }

  std::unique_ptr<ExprNode> parse_unary() {
    if (accept("-")) return make(ExprOp::Neg, parse_unary());
    return parse_primary();
  }

  std::unique_ptr<ExprNode> parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      auto inner = parse_or();
      if (!accept(")")) fail("expected ')'");
      return inner;
    }
    if (c == '\'' || c == '"') {
      std::size_t close = text_.find(c, pos_ + 1);
      if (close == std::string::npos) fail("unterminated symbol literal");
      auto n = std::make_unique<ExprNode>();
      n->literal = Value::symbol(text_.substr(pos_ + 1, close - pos_ - 1));
      pos_ = close + 1;
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
        ++pos_;
      std::string word = text_.substr(start, pos_ - start);
      auto n = std::make_unique<ExprNode>();
      if (word == "true" || word == "false") {
        n->literal = Value::boolean(word == "true");
        return n;
      }
      for (std::size_t i = 0; i < ports_.size(); ++i) {
        if (ports_[i] == word) {
          n->op = ExprOp::Port;
          n->port = i;
          return n;
        }
      }
      pos_ = start;
      fail("unknown port '" + word + "'");
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  std::unique_ptr<ExprNode> parse_number() {
    std::size_t start = pos_;
    bool real = false;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '.' || c == 'e' || c == 'E') {
        real = true;
        ++pos_;
        if ((c == 'e' || c == 'E') && pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+'))
          ++pos_;
      } else {
        break;
      }
    }
    std::string token = text_.substr(start, pos_ - start);
    auto n = std::make_unique<ExprNode>();
    try {
      std::size_t used = 0;
      if (real) {
        n->literal = Value::real(std::stod(token, &used));
      } else {
        n->literal = Value::integer(std::stoll(token, &used));
      }
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      pos_ = start;
      fail("malformed number '" + token + "'");
    }
    return n;
  }

  const std::string& text_;
  const std::vector<std::string>& ports_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Expr Expr::parse(const std::string& text, const std::vector<std::string>& ports) {
  Expr e;
  e.text_ = text;
  e.root_ = detail::ExprParser(text, ports).parse();
  return e;
}

inline Value Expr::arithmetic(ExprOp op, const Value& a, const Value& b) {
  if (!a.is_numeric() || !b.is_numeric())
    throw Error(ErrorCode::Evaluation, "arithmetic on a non-numeric value");
  bool integral = a.kind() != ValueKind::Real && b.kind() != ValueKind::Real;
  if (integral) {
    auto whole = [](const Value& v) -> std::int64_t {
      return v.kind() == ValueKind::Integer ? v.as_int() : static_cast<std::int64_t>(v.as_bool());
    };
    std::int64_t x = whole(a), y = whole(b);
    std::int64_t r = 0;
    bool overflow = false;
    switch (op) {
      case ExprOp::Add: overflow = __builtin_add_overflow(x, y, &r); break;
      case ExprOp::Sub: overflow = __builtin_sub_overflow(x, y, &r); break;
      case ExprOp::Mul: overflow = __builtin_mul_overflow(x, y, &r); break;
      case ExprOp::Div:
        if (y == 0) throw Error(ErrorCode::Evaluation, "division by zero");
        if (x % y != 0) return Value::real(static_cast<double>(x) / static_cast<double>(y));
        r = x / y;
        break;
      default: break;
    }
    if (overflow) throw Error(ErrorCode::Evaluation, "integer overflow");
    return Value::integer(r);
  }
  double x = a.number(), y = b.number();
  switch (op) {
    case ExprOp::Add: return Value::real(x + y);
    case ExprOp::Sub: return Value::real(x - y);
    case ExprOp::Mul: return Value::real(x * y);
    case ExprOp::Div:
      if (y == 0.0) throw Error(ErrorCode::Evaluation, "division by zero");
      return Value::real(x / y);
    default: break;
  }
  throw Error(ErrorCode::Evaluation, "bad arithmetic operator");
}

inline Value Expr::compare(ExprOp op, const Value& a, const Value& b, const EvalContext& ctx) {
  if (a.kind() == ValueKind::Enum || b.kind() == ValueKind::Enum) {
    if (a.kind() != b.kind()) throw Error(ErrorCode::Evaluation, "comparison of enum with a number");
    if (op == ExprOp::Eq) return Value::boolean(a.as_symbol() == b.as_symbol());
    if (op == ExprOp::Ne) return Value::boolean(a.as_symbol() != b.as_symbol());
    throw Error(ErrorCode::Evaluation, "ordering comparison on enum values");
  }
  double x = a.number(), y = b.number();
  bool real = a.kind() == ValueKind::Real || b.kind() == ValueKind::Real;
  double tol = real ? ctx.tolerance : 0.0;
  switch (op) {
    case ExprOp::Eq: return Value::boolean(std::fabs(x - y) <= tol);
    case ExprOp::Ne: return Value::boolean(std::fabs(x - y) > tol);
    case ExprOp::Lt: return Value::boolean(x < y);
    case ExprOp::Gt: return Value::boolean(x > y);
    case ExprOp::Le: return Value::boolean(x <= y);
    case ExprOp::Ge: return Value::boolean(x >= y);
    default: break;
  }
  throw Error(ErrorCode::Evaluation, "bad comparison operator");
}

inline std::optional<Value> Expr::eval(const ExprNode& n, PartialInputs in, const EvalContext& ctx) {
  switch (n.op) {
    case ExprOp::Literal:
      return n.literal;
    case ExprOp::Port:
      if (n.port >= in.size()) return std::nullopt;
      return in[n.port];
    case ExprOp::Not: {
      auto v = eval(*n.lhs, in, ctx);
      if (!v) return std::nullopt;
      return Value::boolean(!is_true(*v));
    }
    case ExprOp::Neg: {
      auto v = eval(*n.lhs, in, ctx);
      if (!v) return std::nullopt;
      return arithmetic(ExprOp::Sub, Value::integer(0), *v);
    }
    case ExprOp::And:
    case ExprOp::Or: {
      bool absorbing = n.op == ExprOp::Or;  // value that decides the result alone
      auto a = eval(*n.lhs, in, ctx);
      if (a && is_true(*a) == absorbing) return Value::boolean(absorbing);
      auto b = eval(*n.rhs, in, ctx);
      if (b && is_true(*b) == absorbing) return Value::boolean(absorbing);
      if (a && b) return Value::boolean(!absorbing);
      return std::nullopt;
    }
    default: {
      auto a = eval(*n.lhs, in, ctx);
      auto b = eval(*n.rhs, in, ctx);
      if (!a || !b) return std::nullopt;
      switch (n.op) {
        case ExprOp::Add:
        case ExprOp::Sub:
        case ExprOp::Mul:
        case ExprOp::Div:
          return arithmetic(n.op, *a, *b);
        default:
          return compare(n.op, *a, *b, ctx);
      }
    }
  }
}

}  // namespace focusdiag
