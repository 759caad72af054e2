#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "kst/ffn.hpp"
#include "kst/target.hpp"

namespace kst {

inline constexpr std::size_t kDefaultLambdaCap = std::size_t{1} << 20;
inline constexpr std::size_t kDefaultBitpackCap = 1000000;
inline constexpr std::size_t kDefaultWindingCap = 8;

// One memory index. bits[((j*d)+p)*n+q] is digit j+1 of entry (p+1, q+1).
struct MemoPoint {
  Integer m;
  std::size_t s = 1;  // 1-based column
  std::vector<int> bits;
  ScalarMatrix x_trunc;
};

Integer encode_point(const std::vector<int>& bits, std::size_t s, std::size_t K, std::size_t d, std::size_t n);
MemoPoint decode_index(const Integer& m, std::size_t K, std::size_t d, std::size_t n);

// All n 2^{Kdn} points, sorted by m.
std::vector<MemoPoint> enumerate_lambda(std::size_t K, std::size_t d, std::size_t n,
                                        std::size_t cap = kDefaultLambdaCap);

// n 3^{Kdn}, the largest possible index.
Integer lambda_span(std::size_t K, std::size_t d, std::size_t n);

struct LabelTable {
  std::size_t K = 0, d = 0, n = 0;
  std::vector<MemoPoint> points;
  std::vector<std::vector<Scalar>> labels;  // labels[r][i] for points[i]
  Scalar g_min, g_max, f_max;

  // Index of m in points, or -1.
  long find(const Integer& m) const;
  const Scalar& label(std::size_t r, const Integer& m) const;
};

// label(r, m) = f_{r,s(m)}(X_trunc(m)). g_min/g_max cover the table and the
// target's declared range when it has one.
LabelTable build_label_table(const TargetOracle& f, std::size_t K, std::size_t lambda_cap = kDefaultLambdaCap);

void write_labels_csv(const LabelTable& t, std::ostream& out);

// Floor expansion of (v - g_min)/(g_max - g_min) to H bits; the top of the
// range gives all ones, a zero-width range gives all zeros.
std::vector<int> binary_expand_label(const Scalar& v, const Scalar& g_min, const Scalar& g_max, std::size_t H);

// Scalar index m in [1, M] -> theta[m-1], exactly. Depth 3, width 2.
VectorNet synth_memo_bitpack(const std::vector<int>& theta, std::size_t cap = kDefaultBitpackCap);

enum class WindingBackend { NP, RC };
enum class MemoBackend { Bitpack, WindingNP, WindingRC };

std::string to_string(MemoBackend b);
MemoBackend memo_backend_from_string(const std::string& s);

struct WindingParams {
  WindingBackend backend = WindingBackend::RC;
  // NP: w3 saw(w2 exp(w0 + w1 m)) + w4.  RC: w1 saw(w0 / (pi + m)) + w2.
  std::vector<double> w;
  std::vector<double> generators;  // exp(w0 + w1 m) or 1/(pi + m), per point
  double achieved_delta = 0.0;
  std::size_t samples_used = 0;
};

double winding_eval(const WindingParams& wp, double m);

struct WindingPoint {
  double m;
  double xi;
};

WindingParams synth_memo_winding(const std::vector<WindingPoint>& points, double delta, WindingBackend backend,
                                 std::size_t budget, std::uint64_t seed, std::size_t max_points = kDefaultWindingCap);

struct OuterOptions {
  MemoBackend backend = MemoBackend::Bitpack;
  std::size_t bitpack_cap = kDefaultBitpackCap;
  std::size_t winding_cap = kDefaultWindingCap;
  double winding_delta = 0.05;
  std::size_t winding_budget = 1000000;
  std::uint64_t seed = 0;
  // Realize the sawtooth as R(t) - R(-t) - F(t) instead of the saw activation.
  bool saw_gadget = false;
};

struct OuterBlock {
  FfnBlock block;
  std::vector<WindingParams> winding;  // one per row for winding backends
};

// d x n block taking the inner matrix Z to the memorized outputs.
OuterBlock assemble_outer_block(const LabelTable& labels, std::size_t H, const OuterOptions& opt);

}  // namespace kst
