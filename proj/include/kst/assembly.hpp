#pragma once

#include <optional>

#include "kst/attention.hpp"
#include "kst/inner.hpp"
#include "kst/memo.hpp"

namespace kst {

enum class Metric { Linf, Lp };

std::string to_string(Metric m);
Metric metric_from_string(const std::string& s);

struct ParamChoice {
  std::size_t K = 1;
  std::size_t H = 1;
  std::size_t L = 1;
  bool clamped = false;  // some formula gave a value below 1
};

// K = ceil((1/beta) log2(2^{1-beta} Q / eps)), H = ceil(log2(2 g_range / eps)), L = dn.
ParamChoice select_params_linfty(double beta, double Q, double epsilon, double g_range, std::size_t d = 1,
                                 std::size_t n = 1);

// K = max of the output-range term and the Hoelder term, H with the (2dn)^{1/p} factor.
ParamChoice select_params_lp(double beta, double Q, double epsilon, double p, std::size_t d, std::size_t n,
                             double B_sigma, double f_max, double g_range);

struct BuildOptions {
  Metric metric = Metric::Linf;
  double p = 2.0;  // used for Lp
  InnerVariant inner = InnerVariant::Floor;
  MemoBackend backend = MemoBackend::Bitpack;
  std::uint64_t seed = 0;
  std::size_t kdn_cap = kDefaultKdnCap;
  std::size_t lambda_cap = kDefaultLambdaCap;
  std::size_t bitpack_cap = kDefaultBitpackCap;
  std::size_t winding_cap = kDefaultWindingCap;
  double winding_delta = 0.0;  // <= 0 selects epsilon / 2
  std::size_t winding_budget = 1000000;
};

struct ManifestEntry {
  std::string block;
  std::string role;
  std::size_t depth = 0;
  std::size_t width = 0;
  std::string expected;  // size class the block is built to meet
};

struct TransformerPipeline {
  ConstructionParams params;
  Metric metric = Metric::Linf;
  InnerVariant inner = InnerVariant::Floor;
  MemoBackend backend = MemoBackend::Bitpack;
  std::string target;
  Scalar g_min, g_max, f_max;
  std::size_t lambda_size = 0;
  FfnBlock sr_block;
  AttentionLayer attention;
  FfnBlock scale_seg;
  FfnBlock outer_block;
  std::vector<WindingParams> winding;
  std::vector<ManifestEntry> manifest;
  std::vector<std::string> warnings;

  bool exact_capable() const;
  bool float_safe() const;
};

TransformerPipeline build_transformer(const TargetOracle& f, double epsilon, const BuildOptions& opt);

// d x n -> d x n, the four stages in order.
ScalarMatrix eval_transformer(const TransformerPipeline& t, const ScalarMatrix& x, Mode mode);

// Intermediate inner matrix Z (after scaling and segmentation).
ScalarMatrix eval_inner_matrix(const TransformerPipeline& t, const ScalarMatrix& x, Mode mode);

Json to_json(const TransformerPipeline& t);
TransformerPipeline pipeline_from_json(const Json& j);

}  // namespace kst
