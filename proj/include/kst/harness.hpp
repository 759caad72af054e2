#pragma once

#include <optional>

#include "kst/assembly.hpp"

namespace kst {

struct DinfReport {
  double sup = 0.0;
  ScalarMatrix argmax;  // input attaining sup
  std::size_t r = 0, s = 0;
  std::size_t points = 0;
  bool exact = false;      // evaluated in exact mode
  bool certified = false;  // grid probing covers every dyadic cell (floor + bitpack)
  Scalar out_min, out_max;
};

// Grid k/(G-1) per axis plus extra_random uniform inputs. grid_per_axis = 0
// selects 2^{K+2}+1.
DinfReport measure_dinf(const TransformerPipeline& t, const TargetOracle& f, std::size_t grid_per_axis,
                        std::size_t extra_random, std::uint64_t seed, unsigned threads = 1);

struct DpReport {
  double estimate = 0.0;
  double std_error = 0.0;
  double mean_pp = 0.0;  // estimate of the integral of sum |g-f|^p
  double se_pp = 0.0;
  std::size_t samples = 0;
};

DpReport measure_dp(const TransformerPipeline& t, const TargetOracle& f, double p, std::size_t n_samples,
                    std::uint64_t seed, unsigned threads = 1);

// Right side of the L^p error split: dn (g_range/2^H + 2^beta Q/2^{(K+2)beta})^p
// + d^2 n^2 (B_sigma + f_max)^p / 2^{K beta p}.
double lp_decomposition_bound(const TransformerPipeline& t, double p);

struct FlawEstimate {
  std::size_t samples = 0;
  std::size_t hits = 0;
  double fraction = 0.0;
};

// Fraction of uniform x in [0,1] where the scalar inner net differs from
// phi_K by more than 1e-12.
FlawEstimate estimate_flaw_measure(const VectorNet& inner, std::size_t K, std::size_t dn, std::size_t n_samples,
                                   std::uint64_t seed, unsigned threads = 1);

struct EqualityReport {
  std::size_t checked = 0;
  std::size_t failed = 0;
  std::size_t flaw_skipped = 0;     // samples touching a flagged interval
  std::size_t flaw_mismatched = 0;  // of those, how many actually differ
  std::string first_failure;
  bool pass() const { return failed == 0; }
};

// Network Z against inner_matrix_reference on every K-bit dyadic matrix (when
// 2^{Kdn} <= 2^16) plus n_random uniform inputs. ReLU skips flagged inputs.
EqualityReport verify_inner_equality(std::size_t K, std::size_t d, std::size_t n, InnerVariant variant,
                                     std::size_t n_random, std::uint64_t seed, double p = 1.0, double beta = 1.0);

// Same check through a built pipeline's first three stages.
EqualityReport verify_pipeline_inner(const TransformerPipeline& t, std::size_t n_random, std::uint64_t seed);

// Scalar inner net against phi_K_reference on all K-bit dyadics and n_random
// uniform points, skipping flagged points when flaws is given.
EqualityReport verify_inner_net(const VectorNet& net, std::size_t K, std::size_t dn, std::size_t n_random,
                                std::uint64_t seed, const FlawReport* flaws = nullptr);

struct MemoReport {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double max_error = 0.0;
  double bound = 0.0;
  std::string first_failure;
  bool pass() const { return failed == 0; }
};

// Outer block on every memory index against the label table: within
// (g_max-g_min) 2^{-H} (bitpack, exact) or the winding delta (float).
MemoReport verify_outer_block(const TransformerPipeline& t, const LabelTable& labels, double winding_delta);

// Whole pipeline at every truncated input X_trunc against f(X_trunc).
MemoReport verify_lambda_points(const TransformerPipeline& t, const TargetOracle& f, std::size_t max_points = 1000);

struct CheckResult {
  std::string suite;
  std::string name;
  bool pass = false;
  std::string summary;
  Json detail;
};

struct Report {
  std::vector<CheckResult> checks;

  bool pass() const;
  Json to_json() const;
  std::string to_text() const;
};

struct SuiteOptions {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::size_t inner_random = 200;
  std::size_t dinf_grid = 0;
  std::size_t dinf_random = 1000;
  std::size_t dp_samples = 10000;
  std::size_t flaw_samples = 100000;
  std::size_t lambda_points = 1000;
  double winding_delta = 0.0;  // <= 0 selects epsilon / 2
};

// suite: inner, memo, e2e or all.
Report run_suite(const std::string& suite, const TransformerPipeline& t, const TargetOracle& f,
                 const SuiteOptions& opt);

}  // namespace kst
