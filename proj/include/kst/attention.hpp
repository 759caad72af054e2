#pragma once

#include "kst/ffn.hpp"

namespace kst {

// Single-head self-attention with residual:
// X + W_O W_V X softmax((W_K X)^T (W_Q X)), softmax taken per column.
struct AttentionLayer {
  ScalarMatrix w_o;  // d_model x s
  ScalarMatrix w_v;  // s x d_model
  ScalarMatrix w_k;
  ScalarMatrix w_q;

  std::size_t model_dim() const { return w_o.rows(); }
  std::size_t head_dim() const { return w_o.cols(); }
  // W_K = W_Q = 0, so the score matrix vanishes and softmax is exactly 1/n.
  bool uniform_scores() const;
};

// Column-wise softmax with max subtraction. Exact input is accepted only when
// every column is constant (the uniform case); otherwise float.
ScalarMatrix softmax_columns(const ScalarMatrix& m);
RealMatrix softmax_columns(const RealMatrix& m);

ScalarMatrix eval_attention(const AttentionLayer& layer, const ScalarMatrix& x, Mode mode);
RealMatrix eval_attention_real(const AttentionLayer& layer, const RealMatrix& x);

// On a 2d x n input whose bottom d rows are zero, copies the column sum of
// the top block into every column of the bottom block. W_O carries n*I.
AttentionLayer make_column_sum_attention(std::size_t d, std::size_t n);

Json to_json(const AttentionLayer& layer);
AttentionLayer attention_from_json(const Json& j);

}  // namespace kst
