#include "kst/scalar.hpp"

#include <charconv>
#include <cmath>
#include <limits>

namespace kst {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ModeUnsupported: return "ModeUnsupported";
    case ErrorKind::ModeMismatch: return "ModeMismatch";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::NotInLambda: return "NotInLambda";
    case ErrorKind::CapExceeded: return "CapExceeded";
    case ErrorKind::SearchExhausted: return "SearchExhausted";
    case ErrorKind::IncompatibleVariant: return "IncompatibleVariant";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Error";
}

const char* to_string(Mode mode) { return mode == Mode::Exact ? "exact" : "float"; }

Scalar Scalar::exact(long num, long den) {
  if (den == 0) throw Error(ErrorKind::OutOfDomain, "zero denominator");
  Rational q(num, den);
  q.canonicalize();
  return Scalar(std::move(q));
}

Scalar Scalar::real(double v) { return Scalar(v); }

Scalar Scalar::exact_from_double(double v) {
  if (!std::isfinite(v)) throw Error(ErrorKind::OutOfDomain, "non-finite value has no exact form");
  return Scalar(Rational(v));
}

Scalar Scalar::pow2(long k) {
  Rational q(1);
  if (k >= 0) {
    mpz_mul_2exp(q.get_num_mpz_t(), q.get_num_mpz_t(), static_cast<mp_bitcnt_t>(k));
  } else {
    mpz_mul_2exp(q.get_den_mpz_t(), q.get_den_mpz_t(), static_cast<mp_bitcnt_t>(-k));
  }
  return Scalar(std::move(q));
}

Scalar Scalar::pow3(unsigned long k) {
  Integer z;
  mpz_ui_pow_ui(z.get_mpz_t(), 3, k);
  return Scalar(Rational(z));
}

const Rational& Scalar::rational() const {
  if (!is_exact()) throw Error(ErrorKind::ModeMismatch, "rational() requested from a float scalar");
  return std::get<0>(value_);
}

double Scalar::to_double() const {
  if (is_exact()) return std::get<0>(value_).get_d();
  return std::get<1>(value_);
}

Scalar Scalar::to_mode(Mode mode) const {
  if (mode == this->mode()) return *this;
  if (mode == Mode::Float) return real(to_double());
  return exact_from_double(std::get<1>(value_));
}

Scalar Scalar::floor() const {
  if (is_exact()) {
    const Rational& q = std::get<0>(value_);
    Integer z;
    mpz_fdiv_q(z.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
    return Scalar(Rational(z));
  }
  return real(std::floor(std::get<1>(value_)));
}

bool Scalar::is_integer() const {
  if (is_exact()) return std::get<0>(value_).get_den() == 1;
  double v = std::get<1>(value_);
  return std::isfinite(v) && std::floor(v) == v;
}

int Scalar::sign() const {
  if (is_exact()) return sgn(std::get<0>(value_));
  double v = std::get<1>(value_);
  return (v > 0) - (v < 0);
}

void Scalar::require_same_mode(const Scalar& o, const char* op) const {
  if (value_.index() != o.value_.index()) {
    throw Error(ErrorKind::ModeMismatch, std::string("operands of '") + op + "' are in different modes");
  }
}

Scalar Scalar::operator-() const {
  if (is_exact()) return Scalar(Rational(-std::get<0>(value_)));
  return real(-std::get<1>(value_));
}

Scalar& Scalar::operator+=(const Scalar& o) {
  require_same_mode(o, "+");
  if (is_exact()) {
    std::get<0>(value_) += std::get<0>(o.value_);
  } else {
    std::get<1>(value_) += std::get<1>(o.value_);
  }
  return *this;
}

Scalar& Scalar::operator-=(const Scalar& o) {
  require_same_mode(o, "-");
  if (is_exact()) {
    std::get<0>(value_) -= std::get<0>(o.value_);
  } else {
    std::get<1>(value_) -= std::get<1>(o.value_);
  }
  return *this;
}

Scalar& Scalar::operator*=(const Scalar& o) {
  require_same_mode(o, "*");
  if (is_exact()) {
    std::get<0>(value_) *= std::get<0>(o.value_);
  } else {
    std::get<1>(value_) *= std::get<1>(o.value_);
  }
  return *this;
}

Scalar& Scalar::operator/=(const Scalar& o) {
  require_same_mode(o, "/");
  if (is_exact()) {
    if (sgn(std::get<0>(o.value_)) == 0) throw Error(ErrorKind::OutOfDomain, "division by zero");
    std::get<0>(value_) /= std::get<0>(o.value_);
  } else {
    std::get<1>(value_) /= std::get<1>(o.value_);
  }
  return *this;
}

bool operator==(const Scalar& a, const Scalar& b) {
  a.require_same_mode(b, "==");
  if (a.is_exact()) return std::get<0>(a.value_) == std::get<0>(b.value_);
  return std::get<1>(a.value_) == std::get<1>(b.value_);
}

bool operator<(const Scalar& a, const Scalar& b) {
  a.require_same_mode(b, "<");
  if (a.is_exact()) return std::get<0>(a.value_) < std::get<0>(b.value_);
  return std::get<1>(a.value_) < std::get<1>(b.value_);
}

std::string Scalar::to_string() const {
  if (is_exact()) return std::get<0>(value_).get_str();
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), std::get<1>(value_));
  return std::string(buf, res.ptr);
}

Scalar Scalar::parse_exact(const std::string& text) {
  if (text.empty()) throw Error(ErrorKind::ParseError, "empty rational literal");
  if (text.find('.') != std::string::npos || text.find('e') != std::string::npos ||
      text.find('E') != std::string::npos) {
    // Finite decimal: mantissa digits over a power of ten.
    std::string mant;
    long exp10 = 0;
    std::size_t i = 0;
    bool neg = false;
    if (text[i] == '+' || text[i] == '-') neg = text[i++] == '-';
    bool seen_dot = false, any_digit = false;
    for (; i < text.size(); ++i) {
      char c = text[i];
      if (c >= '0' && c <= '9') {
        mant.push_back(c);
        any_digit = true;
        if (seen_dot) --exp10;
      } else if (c == '.' && !seen_dot) {
        seen_dot = true;
      } else if (c == 'e' || c == 'E') {
        long e = 0;
        auto r = std::from_chars(text.data() + i + 1 + (text[i + 1] == '+'), text.data() + text.size(), e);
        if (r.ec != std::errc() || r.ptr != text.data() + text.size()) {
          throw Error(ErrorKind::ParseError, "bad exponent in '" + text + "'");
        }
        exp10 += e;
        break;
      } else {
        throw Error(ErrorKind::ParseError, "bad decimal literal '" + text + "'");
      }
    }
    if (!any_digit) throw Error(ErrorKind::ParseError, "bad decimal literal '" + text + "'");
    Rational q(Integer(mant, 10));
    Integer p10;
    mpz_ui_pow_ui(p10.get_mpz_t(), 10, static_cast<unsigned long>(exp10 < 0 ? -exp10 : exp10));
    if (exp10 < 0) {
      q /= Rational(p10);
    } else {
      q *= Rational(p10);
    }
    if (neg) q = -q;
    return Scalar(std::move(q));
  }
  Rational q;
  if (q.set_str(text, 10) != 0 || q.get_den() == 0) {
    throw Error(ErrorKind::ParseError, "bad rational literal '" + text + "'");
  }
  q.canonicalize();
  return Scalar(std::move(q));
}

}  // namespace kst
