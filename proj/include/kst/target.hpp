#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kst/matrix.hpp"

namespace kst {

// f : [0,1]^{d x n} -> R^{d x n}. Exact input gives exact output when the
// target is rational; otherwise evaluate throws ModeUnsupported.
struct TargetOracle {
  std::size_t d = 1;
  std::size_t n = 1;
  double beta = 1.0;
  double Q = 1.0;
  std::string name;
  std::function<ScalarMatrix(const ScalarMatrix&)> fn;
  // Declared bounds on every output entry, if known.
  std::optional<std::pair<Scalar, Scalar>> range;

  ScalarMatrix evaluate(const ScalarMatrix& x) const;
};

TargetOracle constant_target(std::size_t d, std::size_t n, const Scalar& c);
TargetOracle projection_target(std::size_t d, std::size_t n, std::size_t p, std::size_t q);  // 1-based
TargetOracle mean_target(std::size_t d, std::size_t n);
TargetOracle col_mean_target(std::size_t d, std::size_t n);
TargetOracle row_mean_target(std::size_t d, std::size_t n);
TargetOracle min_target(std::size_t d, std::size_t n);
TargetOracle max_target(std::size_t d, std::size_t n);

// Arithmetic over x11, x_12, x[1,2], r, s, numbers, pi, + - * / ^ and
// abs, min, max, sqrt, exp, log, sin, cos. Entry (r,s) of the output is the
// expression evaluated with r, s bound to the 1-based indices.
TargetOracle expression_target(std::size_t d, std::size_t n, const std::string& text);

// Builtin name ("mean", "col_mean", "row_mean", "min", "max", "const:<c>",
// projection token "x11") or an expression.
TargetOracle make_target(const std::string& text, std::size_t d, std::size_t n, double beta, double Q);

// Random pairs X, Y; returns a warning when |f(X)-f(Y)| > Q |X-Y|_inf^beta.
std::optional<std::string> holder_spot_check(const TargetOracle& f, std::size_t pairs, std::uint64_t seed);

}  // namespace kst
