#pragma once

#include <cmath>
#include <compare>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace maxrisk {

/// A point of the extended real line [-inf, +inf].
///
/// Arithmetic follows the measure-theory conventions: (+-inf) * 0 = 0, and
/// the indeterminate sum (+inf) + (-inf) raises std::domain_error instead of
/// producing NaN. NaN can never be stored.
class ExtReal {
 public:
  constexpr ExtReal() = default;
  ExtReal(double v) : v_(v) {  // NOLINT(google-explicit-constructor)
    if (std::isnan(v)) throw std::domain_error("ExtReal: NaN is not an extended real");
  }

  static ExtReal pos_inf() { return ExtReal(std::numeric_limits<double>::infinity()); }
  static ExtReal neg_inf() { return ExtReal(-std::numeric_limits<double>::infinity()); }

  double value() const { return v_; }
  bool is_finite() const { return std::isfinite(v_); }
  bool is_pos_inf() const { return v_ == std::numeric_limits<double>::infinity(); }
  bool is_neg_inf() const { return v_ == -std::numeric_limits<double>::infinity(); }

  friend auto operator<=>(ExtReal a, ExtReal b) { return a.v_ <=> b.v_; }
  friend bool operator==(ExtReal a, ExtReal b) { return a.v_ == b.v_; }

  ExtReal operator-() const { return ExtReal(-v_); }

  friend ExtReal operator+(ExtReal a, ExtReal b) {
    if ((a.is_pos_inf() && b.is_neg_inf()) || (a.is_neg_inf() && b.is_pos_inf()))
      throw std::domain_error("ExtReal: +inf + -inf is undefined");
    return ExtReal(a.v_ + b.v_);
  }
  friend ExtReal operator-(ExtReal a, ExtReal b) { return a + (-b); }
  friend ExtReal operator*(ExtReal a, ExtReal b) {
    if (a.v_ == 0.0 || b.v_ == 0.0) return ExtReal(0.0);
    return ExtReal(a.v_ * b.v_);
  }
  ExtReal& operator+=(ExtReal o) { return *this = *this + o; }
  ExtReal& operator-=(ExtReal o) { return *this = *this - o; }

  friend std::ostream& operator<<(std::ostream& os, ExtReal x) {
    if (x.is_pos_inf()) return os << "inf";
    if (x.is_neg_inf()) return os << "-inf";
    return os << x.v_;
  }

 private:
  double v_ = 0.0;
};

inline ExtReal max(ExtReal a, ExtReal b) { return a < b ? b : a; }
inline ExtReal min(ExtReal a, ExtReal b) { return b < a ? b : a; }

/// |a - b| with the convention that equal infinities have residual 0.
inline double residual(ExtReal a, ExtReal b) {
  if (a == b) return 0.0;
  if (!a.is_finite() || !b.is_finite()) return std::numeric_limits<double>::infinity();
  return std::abs(a.value() - b.value());
}

/// Parses "inf", "+inf", "-inf" or a decimal number.
inline ExtReal parse_ext_real(const std::string& s) {
  if (s == "inf" || s == "+inf") return ExtReal::pos_inf();
  if (s == "-inf") return ExtReal::neg_inf();
  std::size_t used = 0;
  double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("not an extended real: '" + s + "'");
  return ExtReal(v);
}

}  // namespace maxrisk
