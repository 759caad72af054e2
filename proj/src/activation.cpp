#include "kst/activation.hpp"

#include <cmath>

namespace kst {

namespace {

Scalar exact_power(unsigned base, const Scalar& x, const char* name) {
  if (!x.is_integer()) {
    throw Error(ErrorKind::ModeUnsupported,
                std::string(name) + " of a non-integer is irrational; use float mode");
  }
  const Integer& e = x.rational().get_num();
  if (!mpz_fits_slong_p(e.get_mpz_t())) throw Error(ErrorKind::OutOfRange, std::string(name) + " exponent too large");
  long k = e.get_si();
  if (base == 2) return Scalar::pow2(k);
  Scalar p = Scalar::pow3(static_cast<unsigned long>(k < 0 ? -k : k));
  return k < 0 ? Scalar::exact(1) / p : p;
}

}  // namespace

bool Activation::exact_capable() const {
  switch (kind) {
    case ActivationKind::Identity:
    case ActivationKind::ReLU:
    case ActivationKind::Floor:
    case ActivationKind::PeriodicSaw:
    case ActivationKind::Exp2:
    case ActivationKind::Exp3:
      return true;
    default:
      return false;
  }
}

std::string to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::Identity: return "identity";
    case ActivationKind::ReLU: return "relu";
    case ActivationKind::Floor: return "floor";
    case ActivationKind::Sine: return "sine";
    case ActivationKind::Cosine: return "cosine";
    case ActivationKind::Exp2: return "exp2";
    case ActivationKind::Exp3: return "exp3";
    case ActivationKind::PeriodicSaw: return "saw";
    case ActivationKind::Reciprocal: return "reciprocal";
    case ActivationKind::AnalyticNP: return "analytic_np";
  }
  return "identity";
}

ActivationKind activation_kind_from_string(const std::string& name) {
  static const ActivationKind all[] = {
      ActivationKind::Identity, ActivationKind::ReLU,        ActivationKind::Floor,
      ActivationKind::Sine,     ActivationKind::Cosine,      ActivationKind::Exp2,
      ActivationKind::Exp3,     ActivationKind::PeriodicSaw, ActivationKind::Reciprocal,
      ActivationKind::AnalyticNP};
  for (ActivationKind k : all) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorKind::ParseError, "unknown activation '" + name + "'");
}

Scalar apply_activation(const Activation& act, const Scalar& x) {
  if (x.is_exact() && !act.exact_capable()) {
    throw Error(ErrorKind::ModeUnsupported, to_string(act.kind) + " has irrational outputs; exact mode refused");
  }
  switch (act.kind) {
    case ActivationKind::Identity:
      return x;
    case ActivationKind::ReLU:
      return x.sign() > 0 ? x : Scalar::zero(x.mode());
    case ActivationKind::Floor:
      return x.floor();
    case ActivationKind::PeriodicSaw:
      return x - x.floor();
    case ActivationKind::Exp2:
      if (x.is_exact()) return exact_power(2, x, "2^x");
      break;
    case ActivationKind::Exp3:
      if (x.is_exact()) return exact_power(3, x, "3^x");
      break;
    default:
      break;
  }
  return Scalar::real(apply_activation_real(act, x.to_double()));
}

double apply_activation_real(const Activation& act, double x) {
  switch (act.kind) {
    case ActivationKind::Identity: return x;
    case ActivationKind::ReLU: return x > 0 ? x : 0.0;
    case ActivationKind::Floor: return std::floor(x);
    case ActivationKind::PeriodicSaw: return x - std::floor(x);
    case ActivationKind::Exp2: return std::exp2(x);
    case ActivationKind::Exp3: return std::pow(3.0, x);
    case ActivationKind::Sine: return std::sin(x);
    case ActivationKind::Cosine: return std::cos(x);
    case ActivationKind::Reciprocal: return 1.0 / (act.param_value + x);
    case ActivationKind::AnalyticNP: return act.param_name == "tanh" ? std::tanh(x) : std::exp(x);
  }
  return x;
}

Scalar eval_gadget(Gadget gadget, const Scalar& x) {
  const Mode m = x.mode();
  const Scalar one = Scalar::one(m);
  auto R = [](const Scalar& v) { return apply_activation(ActivationKind::ReLU, v); };
  auto F = [](const Scalar& v) { return apply_activation(ActivationKind::Floor, v); };
  switch (gadget) {
    case Gadget::Indicator:
      return F(-R(-R(x + one) + one) + one);
    case Gadget::Sawtooth:
      return R(x) - R(-x) - F(x);
    case Gadget::RampT: {
      if (x.is_exact()) throw Error(ErrorKind::ModeUnsupported, "ramp gadget uses cos(4pi/9)");
      const Scalar c = Scalar::real(std::cos(4.0 * std::numbers::pi / 9.0));
      return -R(-R(-(x / c) + one) + one) + one;
    }
    case Gadget::Filter:
      return -R(-R(x) + one) + one;
  }
  return x;
}

}  // namespace kst
