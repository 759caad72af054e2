#include "kst/attention.hpp"

#include <algorithm>
#include <cmath>

namespace kst {

namespace {

bool all_zero(const ScalarMatrix& m) {
  return std::all_of(m.data().begin(), m.data().end(), [](const Scalar& s) { return s.is_zero(); });
}

void check_shapes(const AttentionLayer& layer, std::size_t rows) {
  const std::size_t dm = layer.model_dim();
  const std::size_t s = layer.head_dim();
  auto bad = [](const char* name, const ScalarMatrix& m, std::size_t r, std::size_t c) {
    if (m.rows() != r || m.cols() != c) {
      throw Error(ErrorKind::ShapeMismatch, std::string(name) + " is " + shape_string(m.rows(), m.cols()) +
                                                ", expected " + shape_string(r, c));
    }
  };
  bad("W_V", layer.w_v, s, dm);
  bad("W_K", layer.w_k, layer.w_k.rows(), dm);
  bad("W_Q", layer.w_q, layer.w_k.rows(), dm);
  if (rows != dm) {
    throw Error(ErrorKind::ShapeMismatch,
                "attention expects " + std::to_string(dm) + " rows, got " + std::to_string(rows));
  }
}

RealMatrix real_matmul(const RealMatrix& a, const RealMatrix& b) {
  RealMatrix out(a.rows(), b.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double v = a(i, k);
      if (v == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += v * b(k, j);
    }
  }
  return out;
}

RealMatrix transpose(const RealMatrix& a) {
  RealMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  }
  return t;
}

}  // namespace

bool AttentionLayer::uniform_scores() const { return all_zero(w_k) || all_zero(w_q); }

RealMatrix softmax_columns(const RealMatrix& m) {
  RealMatrix out(m.rows(), m.cols());
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double mx = -INFINITY;
    for (std::size_t r = 0; r < m.rows(); ++r) mx = std::max(mx, m(r, c));
    double sum = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      out(r, c) = std::exp(m(r, c) - mx);
      sum += out(r, c);
    }
    for (std::size_t r = 0; r < m.rows(); ++r) out(r, c) /= sum;
  }
  return out;
}

ScalarMatrix softmax_columns(const ScalarMatrix& m) {
  if (m.empty() || !m.data()[0].is_exact()) return from_real(softmax_columns(to_real(m)), Mode::Float);
  ScalarMatrix out(m.rows(), m.cols());
  const Scalar w = Scalar::exact(1, static_cast<long>(m.rows()));
  for (std::size_t c = 0; c < m.cols(); ++c) {
    for (std::size_t r = 1; r < m.rows(); ++r) {
      if (m(r, c) != m(0, c)) {
        throw Error(ErrorKind::ModeUnsupported, "softmax of a non-constant column is irrational; use float mode");
      }
    }
    for (std::size_t r = 0; r < m.rows(); ++r) out(r, c) = w;
  }
  return out;
}

RealMatrix eval_attention_real(const AttentionLayer& layer, const RealMatrix& x) {
  if (x.rows() != layer.model_dim()) {
    throw Error(ErrorKind::ShapeMismatch,
                "attention expects " + std::to_string(layer.model_dim()) + " rows, got " + std::to_string(x.rows()));
  }
  const RealMatrix k = real_matmul(to_real(layer.w_k), x);
  const RealMatrix q = real_matmul(to_real(layer.w_q), x);
  const RealMatrix a = softmax_columns(real_matmul(transpose(k), q));
  const RealMatrix ov = real_matmul(to_real(layer.w_o), to_real(layer.w_v));
  RealMatrix out = real_matmul(real_matmul(ov, x), a);
  for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] += x.data()[i];
  return out;
}

ScalarMatrix eval_attention(const AttentionLayer& layer, const ScalarMatrix& x, Mode mode) {
  check_shapes(layer, x.rows());
  if (mode == Mode::Float) return from_real(eval_attention_real(layer, to_real(x)), Mode::Float);
  if (!layer.uniform_scores()) {
    throw Error(ErrorKind::ModeUnsupported, "attention scores are nonzero; exact softmax undefined");
  }
  const ScalarMatrix xe = to_mode(x, Mode::Exact);
  const std::size_t n = x.cols();
  // Uniform softmax: every output column sees the column average of W_O W_V X.
  const ScalarMatrix v = matmul(layer.w_o, matmul(layer.w_v, xe));
  ScalarMatrix out = xe;
  const Scalar inv_n = Scalar::exact(1, static_cast<long>(n));
  for (std::size_t r = 0; r < v.rows(); ++r) {
    Scalar sum = Scalar::exact(0);
    for (std::size_t c = 0; c < n; ++c) sum += v(r, c);
    const Scalar avg = sum * inv_n;
    for (std::size_t c = 0; c < n; ++c) out(r, c) += avg;
  }
  return out;
}

AttentionLayer make_column_sum_attention(std::size_t d, std::size_t n) {
  if (d == 0 || n == 0) throw Error(ErrorKind::ShapeMismatch, "column-sum attention needs d, n >= 1");
  AttentionLayer layer{zeros(2 * d, 2 * d), identity_matrix(2 * d), zeros(2 * d, 2 * d), zeros(2 * d, 2 * d)};
  for (std::size_t i = 0; i < d; ++i) layer.w_o(d + i, i) = Scalar::exact(static_cast<long>(n));
  return layer;
}

Json to_json(const AttentionLayer& layer) {
  return Json{{"heads", 1},
              {"W_O", matrix_to_json(layer.w_o)},
              {"W_V", matrix_to_json(layer.w_v)},
              {"W_K", matrix_to_json(layer.w_k)},
              {"W_Q", matrix_to_json(layer.w_q)}};
}

AttentionLayer attention_from_json(const Json& j) {
  try {
    return AttentionLayer{matrix_from_json(j.at("W_O")), matrix_from_json(j.at("W_V")),
                          matrix_from_json(j.at("W_K")), matrix_from_json(j.at("W_Q"))};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("attention: ") + e.what());
  }
}

}  // namespace kst
