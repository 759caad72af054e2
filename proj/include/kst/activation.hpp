#pragma once

#include <numbers>
#include <string>

#include "kst/scalar.hpp"

namespace kst {

enum class ActivationKind {
  Identity,
  ReLU,
  Floor,
  Sine,
  Cosine,
  Exp2,
  Exp3,
  PeriodicSaw,  // x - floor(x)
  Reciprocal,   // 1 / (alpha + x), alpha transcendental
  AnalyticNP,   // real-analytic non-polynomial, exp by default
};

// Activation tag plus the constant some kinds carry. For Reciprocal the
// constant is the offset alpha (named, e.g. "pi"); for AnalyticNP the name
// selects the function ("exp" or "tanh") and value is unused.
struct Activation {
  ActivationKind kind = ActivationKind::Identity;
  std::string param_name;
  double param_value = 0.0;

  static Activation identity() { return {}; }
  static Activation relu() { return {ActivationKind::ReLU, {}, 0.0}; }
  static Activation floor() { return {ActivationKind::Floor, {}, 0.0}; }
  static Activation saw() { return {ActivationKind::PeriodicSaw, {}, 0.0}; }
  static Activation exp2() { return {ActivationKind::Exp2, {}, 0.0}; }
  static Activation exp3() { return {ActivationKind::Exp3, {}, 0.0}; }
  static Activation sine() { return {ActivationKind::Sine, {}, 0.0}; }
  static Activation cosine() { return {ActivationKind::Cosine, {}, 0.0}; }
  static Activation reciprocal(std::string alpha_name = "pi", double alpha = std::numbers::pi) {
    return {ActivationKind::Reciprocal, std::move(alpha_name), alpha};
  }
  static Activation analytic_np(std::string fn = "exp") { return {ActivationKind::AnalyticNP, std::move(fn), 0.0}; }

  // Whether exact-mode evaluation is defined. Exp2/Exp3 are defined only on
  // integer arguments; that check happens at evaluation time.
  bool exact_capable() const;

  friend bool operator==(const Activation&, const Activation&) = default;
};

std::string to_string(ActivationKind kind);
ActivationKind activation_kind_from_string(const std::string& name);

Scalar apply_activation(const Activation& act, const Scalar& x);
inline Scalar apply_activation(ActivationKind kind, const Scalar& x) {
  if (kind == ActivationKind::Reciprocal) return apply_activation(Activation::reciprocal(), x);
  if (kind == ActivationKind::AnalyticNP) return apply_activation(Activation::analytic_np(), x);
  return apply_activation(Activation{kind, {}, 0.0}, x);
}

// Binary64 evaluation of any activation.
double apply_activation_real(const Activation& act, double x);

// Small ReLU/floor compositions, each evaluated through apply_activation
// exactly as written so they double as activation tests.
enum class Gadget {
  Indicator,  // 1[x >= 0] = F(-R(-R(x+1)+1)+1)
  Sawtooth,   // x - floor(x) = R(x) - R(-x) - F(x)
  RampT,      // -R(-R(-x/cos(4pi/9)+1)+1)+1, float mode only
  Filter,     // -R(-R(x)+1)+1, clamp to [0,1]
};

Scalar eval_gadget(Gadget gadget, const Scalar& x);

}  // namespace kst
