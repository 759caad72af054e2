#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "kst/ffn.hpp"

namespace kst {

enum class InnerVariant { Floor, ReLU };

std::string to_string(InnerVariant v);
InnerVariant inner_variant_from_string(const std::string& s);

inline constexpr std::size_t kDefaultKdnCap = 64;

struct ConstructionParams {
  std::size_t d = 1;
  std::size_t n = 1;
  std::size_t K = 1;
  double beta = 1.0;
  double Q = 1.0;
  double p = std::numeric_limits<double>::infinity();  // infinity selects the sup metric
  double epsilon = 1.0;
  std::size_t H = 1;
  std::size_t L = 1;
  double B_sigma = 0.0;

  std::size_t kdn() const { return K * d * n; }
  bool is_linf() const { return p == std::numeric_limits<double>::infinity(); }
  // Throws on any violated invariant.
  void validate() const;
};

Json to_json(const ConstructionParams& p);
ConstructionParams params_from_json(const Json& j);

// Open interval (lo, hi) on the real line.
struct Interval {
  Rational lo;
  Rational hi;
};

// Where the ReLU inner network may differ from phi_K on [0,1].
struct FlawReport {
  std::size_t K = 0;
  Rational ramp;                              // r-space ramp width
  std::vector<std::vector<Interval>> levels;  // levels[j-1]: open intervals for bit j
  Rational total_measure_bound;               // K * ramp
  double target_bound = 0.0;                  // 2^{-K beta p}

  // x in [0,1] lies in some level's interval.
  bool contains(const Rational& x) const;
};

// Digits a_1..a_K of x in [0,1]; dyadics terminate, x = 1 gives all ones.
std::vector<int> binary_digits(const Scalar& x, std::size_t K);

// sum_{j<=K} 2 a_j 3^{-1-dn(j-1)}, exact.
Scalar phi_K_reference(const Scalar& x, std::size_t K, std::size_t dn);

// Scalar-input floor network equal to phi_K on all of [0,1]. Depth K+1, width 3.
VectorNet synth_inner_floor(std::size_t K, std::size_t d, std::size_t n, std::size_t kdn_cap = kDefaultKdnCap);

// x on [2q, 2q+1] -> 3^{1-q} phi_K(x - 2q), q < n. Depth K+3, width 3n.
VectorNet synth_piecewise_inner_floor(std::size_t K, std::size_t d, std::size_t n,
                                      std::size_t kdn_cap = kDefaultKdnCap);

struct ReluInner {
  VectorNet net;
  FlawReport flaws;
};

// ReLU-only network: 0 below 0, phi_K on [0,1] off the flaw set, 1 above 1.
ReluInner synth_inner_relu(std::size_t K, std::size_t d, std::size_t n, double p, double beta,
                           std::size_t kdn_cap = kDefaultKdnCap);

// Sum over q < n of 3^{1-q} f(x - 2q) for the ReLU inner f. The left segments
// leave a constant offset on segment q.
ReluInner synth_piecewise_inner_relu(std::size_t K, std::size_t d, std::size_t n, double p, double beta,
                                     std::size_t kdn_cap = kDefaultKdnCap);

// d x n -> 2d x n: column s of the top block is 3 sum_p 3^{-((p-1)n+s)} phi_K(x_ps)
// on every row, bottom block zero.
FfnBlock synth_sr_block(std::size_t K, std::size_t d, std::size_t n, InnerVariant variant, double p = 1.0,
                        double beta = 1.0, std::size_t kdn_cap = kDefaultKdnCap);

// 2d x n -> d x n: (0, 3^{Kdn} I) Z + b, column s of b equal to 1 + (s-1) 3^{Kdn}.
FfnBlock make_scaling_segmentation(std::size_t K, std::size_t d, std::size_t n,
                                   std::size_t kdn_cap = kDefaultKdnCap);

// Integer matrix Z computed straight from phi_K.
ScalarMatrix inner_matrix_reference(const ScalarMatrix& x, std::size_t K, std::size_t d, std::size_t n);

void check_kdn(std::size_t K, std::size_t d, std::size_t n, std::size_t cap);

}  // namespace kst
