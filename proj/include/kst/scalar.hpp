#pragma once

#include <gmpxx.h>

#include <string>
#include <variant>

#include "kst/errors.hpp"

namespace kst {

// Exact mode carries arbitrary-precision rationals; Float mode carries binary64.
enum class Mode { Exact, Float };

const char* to_string(Mode mode);

using Rational = mpq_class;
using Integer = mpz_class;

// A real number in one of the two evaluation modes. Arithmetic between
// scalars of different modes throws ModeMismatch; conversions are explicit.
class Scalar {
 public:
  Scalar() : value_(Rational(0)) {}
  Scalar(const Rational& q) : value_(q) {}  // NOLINT(google-explicit-constructor)
  Scalar(Rational&& q) : value_(std::move(q)) {}  // NOLINT(google-explicit-constructor)

  static Scalar exact(long v) { return Scalar(Rational(v)); }
  static Scalar exact(const Integer& v) { return Scalar(Rational(v)); }
  static Scalar exact(long num, long den);
  static Scalar real(double v);  // float mode
  static Scalar zero(Mode mode) { return mode == Mode::Exact ? exact(0) : real(0.0); }
  static Scalar one(Mode mode) { return mode == Mode::Exact ? exact(1) : real(1.0); }
  // Exact rational with the same value as the binary64 input (doubles are dyadic).
  static Scalar exact_from_double(double v);
  // 2^k as an exact rational.
  static Scalar pow2(long k);
  // 3^k (k >= 0) as an exact integer.
  static Scalar pow3(unsigned long k);

  Mode mode() const { return value_.index() == 0 ? Mode::Exact : Mode::Float; }
  bool is_exact() const { return value_.index() == 0; }

  // Requires exact mode.
  const Rational& rational() const;
  // Value as binary64, for either mode (rounding if exact).
  double to_double() const;
  Scalar to_mode(Mode mode) const;

  Scalar floor() const;
  bool is_integer() const;
  int sign() const;
  bool is_zero() const { return sign() == 0; }
  Scalar abs() const { return sign() < 0 ? -*this : *this; }

  Scalar operator-() const;
  Scalar& operator+=(const Scalar& o);
  Scalar& operator-=(const Scalar& o);
  Scalar& operator*=(const Scalar& o);
  Scalar& operator/=(const Scalar& o);

  friend Scalar operator+(Scalar a, const Scalar& b) { return a += b; }
  friend Scalar operator-(Scalar a, const Scalar& b) { return a -= b; }
  friend Scalar operator*(Scalar a, const Scalar& b) { return a *= b; }
  friend Scalar operator/(Scalar a, const Scalar& b) { return a /= b; }

  friend bool operator==(const Scalar& a, const Scalar& b);
  friend bool operator<(const Scalar& a, const Scalar& b);
  friend bool operator!=(const Scalar& a, const Scalar& b) { return !(a == b); }
  friend bool operator<=(const Scalar& a, const Scalar& b) { return !(b < a); }
  friend bool operator>(const Scalar& a, const Scalar& b) { return b < a; }
  friend bool operator>=(const Scalar& a, const Scalar& b) { return !(a < b); }

  // "p/q" (or "p") in exact mode; shortest round-trip decimal in float mode.
  std::string to_string() const;
  // Inverse of to_string for exact values: accepts "p", "p/q" and finite decimals.
  static Scalar parse_exact(const std::string& text);

 private:
  explicit Scalar(double v) : value_(v) {}
  void require_same_mode(const Scalar& o, const char* op) const;

  std::variant<Rational, double> value_;
};

}  // namespace kst
