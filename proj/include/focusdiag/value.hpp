#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "error.hpp"

namespace focusdiag {

enum class ValueKind { Boolean, Enum, Integer, Real };

inline const char* value_kind_name(ValueKind kind) {
  switch (kind) {
    case ValueKind::Boolean: return "bool";
    case ValueKind::Enum: return "enum";
    case ValueKind::Integer: return "int";
    case ValueKind::Real: return "real";
  }
  return "?";
}

/// A concrete signal value. Enum values carry their symbol only; membership in
/// a particular domain is checked by `Domain::coerce`.
class Value {
 public:
  Value() : data_(false) {}

  static Value boolean(bool b) { return Value(b); }
  static Value integer(std::int64_t i) { return Value(i); }
  static Value real(double r) { return Value(r); }
  static Value symbol(std::string s) { return Value(std::move(s)); }

  ValueKind kind() const {
    switch (data_.index()) {
      case 0: return ValueKind::Boolean;
      case 1: return ValueKind::Integer;
      case 2: return ValueKind::Real;
      default: return ValueKind::Enum;
    }
  }

  bool is_numeric() const { return kind() != ValueKind::Enum; }

  bool as_bool() const { return std::get<bool>(data_); }
  std::int64_t as_int() const { return std::get<std::int64_t>(data_); }
  double as_real() const { return std::get<double>(data_); }
  const std::string& as_symbol() const { return std::get<std::string>(data_); }

  /// Numeric view: Boolean counts as 0/1.
  double number() const {
    switch (kind()) {
      case ValueKind::Boolean: return as_bool() ? 1.0 : 0.0;
      case ValueKind::Integer: return static_cast<double>(as_int());
      case ValueKind::Real: return as_real();
      case ValueKind::Enum: break;
    }
    throw Error(ErrorCode::Evaluation, "enum value '" + as_symbol() + "' used as a number");
  }

  bool operator==(const Value& other) const { return data_ == other.data_; }
  bool operator<(const Value& other) const { return data_ < other.data_; }

  std::string to_string() const {
    switch (kind()) {
      case ValueKind::Boolean: return as_bool() ? "1" : "0";
      case ValueKind::Integer: return std::to_string(as_int());
      case ValueKind::Real: {
        std::string s = std::to_string(as_real());
        while (s.size() > 1 && s.back() == '0') s.pop_back();
        if (!s.empty() && s.back() == '.') s.pop_back();
        return s;
      }
      case ValueKind::Enum: return as_symbol();
    }
    return {};
  }

 private:
  explicit Value(bool b) : data_(b) {}
  explicit Value(std::int64_t i) : data_(i) {}
  explicit Value(double r) : data_(r) {}
  explicit Value(std::string s) : data_(std::move(s)) {}

  std::variant<bool, std::int64_t, double, std::string> data_;
};

/// Output domain of a component.
struct Domain {
  ValueKind kind = ValueKind::Boolean;
  std::vector<std::string> symbols;  // Enum only, ordered
  double tolerance = 0.0;            // Real only

  static Domain boolean() { return {}; }
  static Domain integer() { return {ValueKind::Integer, {}, 0.0}; }
  static Domain real(double tolerance = 0.0) { return {ValueKind::Real, {}, tolerance}; }
  static Domain enumeration(std::vector<std::string> symbols) {
    return {ValueKind::Enum, std::move(symbols), 0.0};
  }

  bool finite() const { return kind == ValueKind::Boolean || kind == ValueKind::Enum; }

  std::size_t size() const {
    if (kind == ValueKind::Boolean) return 2;
    if (kind == ValueKind::Enum) return symbols.size();
    return 0;
  }

  /// i-th value of a finite domain (false < true for Boolean).
  Value at(std::size_t i) const {
    if (kind == ValueKind::Boolean) return Value::boolean(i != 0);
    return Value::symbol(symbols.at(i));
  }

  std::optional<std::size_t> index_of(const Value& v) const {
    if (kind == ValueKind::Boolean && v.kind() == ValueKind::Boolean) return v.as_bool() ? 1 : 0;
    if (kind == ValueKind::Enum && v.kind() == ValueKind::Enum) {
      for (std::size_t i = 0; i < symbols.size(); ++i)
        if (symbols[i] == v.as_symbol()) return i;
    }
    return std::nullopt;
  }

  bool equal(const Value& a, const Value& b) const {
    if (kind == ValueKind::Real && a.is_numeric() && b.is_numeric())
      return std::fabs(a.number() - b.number()) <= tolerance;
    return a == b;
  }

  /// Converts an expression result or parsed literal into this domain.
  /// Numbers become Booleans by non-zero test; integral reals become Integers.
  Value coerce(const Value& v) const {
    switch (kind) {
      case ValueKind::Boolean:
        if (v.kind() == ValueKind::Boolean) return v;
        if (v.kind() == ValueKind::Integer) return Value::boolean(v.as_int() != 0);
        if (v.kind() == ValueKind::Real) return Value::boolean(v.as_real() != 0.0);
        break;
      case ValueKind::Integer:
        if (v.kind() == ValueKind::Integer) return v;
        if (v.kind() == ValueKind::Boolean) return Value::integer(v.as_bool() ? 1 : 0);
        if (v.kind() == ValueKind::Real && std::floor(v.as_real()) == v.as_real())
          return Value::integer(static_cast<std::int64_t>(v.as_real()));
        break;
      case ValueKind::Real:
        if (v.is_numeric()) return Value::real(v.number());
        break;
      case ValueKind::Enum:
        if (v.kind() == ValueKind::Enum && index_of(v)) return v;
        break;
    }
    throw Error(ErrorCode::DomainViolation,
                "value '" + v.to_string() + "' is outside the " + value_kind_name(kind) + " domain");
  }

  bool operator==(const Domain&) const = default;
};

}  // namespace focusdiag
