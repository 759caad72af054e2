#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kst/activation.hpp"
#include "kst/matrix.hpp"

namespace kst {

using Json = nlohmann::ordered_json;

// One affine map followed by per-row activations:
// F_l = act(W_l F_{l-1} + B_l), B_l has one column per token.
struct Layer {
  ScalarMatrix weight;                  // n_l x n_{l-1}
  ScalarMatrix bias;                    // n_l x n_columns
  std::vector<Activation> activations;  // n_l tags
};

// Feedforward block acting column-wise on (input_rows x n_columns) matrices,
// without skip connections. The final layer is always linear.
//
// Depth counts affine maps (L - 1 activated layers plus the output map);
// width is the largest hidden layer (or the output size for depth 1).
class FfnBlock {
 public:
  FfnBlock() = default;
  FfnBlock(std::vector<Layer> layers, std::size_t n_columns);

  std::size_t input_rows() const { return layers_.empty() ? 0 : layers_.front().weight.cols(); }
  std::size_t output_rows() const { return layers_.empty() ? 0 : layers_.back().weight.rows(); }
  std::size_t n_columns() const { return n_columns_; }
  std::size_t depth() const { return layers_.size(); }
  std::size_t width() const;
  const std::vector<Layer>& layers() const { return layers_; }

  // Every weight/bias exact, every activation exact-capable.
  bool exact_capable() const { return exact_capable_; }
  // Float evaluation reproduces the block: no exact integer weight beyond 2^53
  // and nothing overflows binary64.
  bool float_safe() const { return float_safe_; }

  ScalarMatrix eval(const ScalarMatrix& x, Mode mode) const;
  // Float-mode fast path on plain doubles.
  RealMatrix eval_real(const RealMatrix& x) const;

  friend bool operator==(const FfnBlock& a, const FfnBlock& b) {
    return a.n_columns_ == b.n_columns_ && a.layers_ == b.layers_;
  }

 private:
  struct SparseRow {
    std::vector<std::pair<std::size_t, Scalar>> exact;
    std::vector<std::pair<std::size_t, double>> real;
  };
  void index();

  std::vector<Layer> layers_;
  std::size_t n_columns_ = 0;
  bool exact_capable_ = false;
  bool float_safe_ = false;
  std::vector<std::vector<SparseRow>> sparse_;   // per layer, per output row
  std::vector<RealMatrix> real_bias_;
};

bool operator==(const Layer& a, const Layer& b);

// A block generated from a net acting on vectors: a single bias column.
using VectorNet = FfnBlock;

ScalarMatrix eval_ffn(const FfnBlock& block, const ScalarMatrix& x, Mode mode);

// B_l = b_l 1_{1 x n} for every layer of a one-column net.
FfnBlock broadcast_to_block(const VectorNet& net, std::size_t n_columns);

// Depth-1 block x -> W x + B.
FfnBlock affine_block(const ScalarMatrix& weight, const ScalarMatrix& bias);

// Sequential composition (first block applied first). The output map of each
// block is folded into the first map of the next, so depths add minus one.
FfnBlock stack(std::span<const FfnBlock> blocks);
FfnBlock stack(const FfnBlock& a, const FfnBlock& b);

// Row-wise concatenation of blocks that read the same input rows. Shallower
// members are padded with identity layers.
FfnBlock concat_parallel(std::span<const FfnBlock> blocks);

// Block-diagonal arrangement: member i reads its own slice of the input rows.
FfnBlock block_diagonal(std::span<const FfnBlock> blocks);

Json scalar_to_json(const Scalar& s);
Scalar scalar_from_json(const Json& j);
Json matrix_to_json(const ScalarMatrix& m);
ScalarMatrix matrix_from_json(const Json& j);
Json activation_to_json(const Activation& a);
Activation activation_from_json(const Json& j);
Json to_json(const FfnBlock& block);
FfnBlock ffn_from_json(const Json& j);

}  // namespace kst
