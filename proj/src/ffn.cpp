#include "kst/ffn.hpp"

#include <algorithm>
#include <cmath>

namespace kst {

namespace {

const Scalar kFloatIntLimit = Scalar::pow2(53);

bool float_representable(const Scalar& s) {
  if (!s.is_exact()) return std::isfinite(s.to_double());
  if (!std::isfinite(s.to_double())) return false;
  // Integers past 2^53 lose their low bits, which breaks floor semantics.
  return !(s.is_integer() && s.abs() >= kFloatIntLimit);
}

void check_same_columns(const FfnBlock& a, const FfnBlock& b, const char* op) {
  if (a.n_columns() != b.n_columns()) {
    throw Error(ErrorKind::ShapeMismatch, std::string(op) + ": blocks act on " + std::to_string(a.n_columns()) +
                                              " and " + std::to_string(b.n_columns()) + " columns");
  }
}

std::vector<Layer> padded_layers(const FfnBlock& block, std::size_t depth) {
  std::vector<Layer> layers = block.layers();
  const std::size_t out = block.output_rows();
  while (layers.size() < depth) {
    layers.push_back(Layer{identity_matrix(out), zeros(out, block.n_columns()),
                           std::vector<Activation>(out, Activation::identity())});
  }
  return layers;
}

}  // namespace

bool operator==(const Layer& a, const Layer& b) {
  return identical(a.weight, b.weight) && identical(a.bias, b.bias) && a.activations == b.activations;
}

FfnBlock::FfnBlock(std::vector<Layer> layers, std::size_t n_columns)
    : layers_(std::move(layers)), n_columns_(n_columns) {
  if (layers_.empty()) throw Error(ErrorKind::ShapeMismatch, "feedforward block needs at least one layer");
  if (n_columns_ == 0) throw Error(ErrorKind::ShapeMismatch, "feedforward block needs at least one column");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    const std::size_t rows = layer.weight.rows();
    if (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows()) {
      throw Error(ErrorKind::ShapeMismatch, "layer " + std::to_string(l + 1) + " expects " +
                                                std::to_string(layer.weight.cols()) + " inputs but receives " +
                                                std::to_string(layers_[l - 1].weight.rows()));
    }
    if (layer.bias.rows() != rows || layer.bias.cols() != n_columns_) {
      throw Error(ErrorKind::ShapeMismatch, "layer " + std::to_string(l + 1) + " bias is " +
                                                shape_string(layer.bias.rows(), layer.bias.cols()) + ", expected " +
                                                shape_string(rows, n_columns_));
    }
    if (layer.activations.size() != rows) {
      throw Error(ErrorKind::ShapeMismatch, "layer " + std::to_string(l + 1) + " has " +
                                                std::to_string(layer.activations.size()) + " activation tags for " +
                                                std::to_string(rows) + " units");
    }
  }
  // Output map is linear.
  for (Activation& a : layers_.back().activations) a = Activation::identity();
  index();
}

void FfnBlock::index() {
  exact_capable_ = true;
  float_safe_ = true;
  sparse_.clear();
  real_bias_.clear();
  for (const Layer& layer : layers_) {
    std::vector<SparseRow> rows(layer.weight.rows());
    for (std::size_t r = 0; r < layer.weight.rows(); ++r) {
      for (std::size_t c = 0; c < layer.weight.cols(); ++c) {
        const Scalar& w = layer.weight(r, c);
        if (w.is_zero()) continue;
        if (!w.is_exact()) exact_capable_ = false;
        if (!float_representable(w)) float_safe_ = false;
        if (w.is_exact()) rows[r].exact.emplace_back(c, w);
        rows[r].real.emplace_back(c, w.to_double());
      }
      if (!layer.activations[r].exact_capable()) exact_capable_ = false;
    }
    for (const Scalar& b : layer.bias.data()) {
      if (!b.is_exact()) exact_capable_ = false;
      if (!float_representable(b)) float_safe_ = false;
    }
    sparse_.push_back(std::move(rows));
    real_bias_.push_back(to_real(layer.bias));
  }
}

std::size_t FfnBlock::width() const {
  if (layers_.size() == 1) return output_rows();
  std::size_t w = 0;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) w = std::max(w, layers_[l].weight.rows());
  return w;
}

ScalarMatrix FfnBlock::eval(const ScalarMatrix& x, Mode mode) const {
  if (x.rows() != input_rows() || x.cols() != n_columns_) {
    throw Error(ErrorKind::ShapeMismatch, "block expects " + shape_string(input_rows(), n_columns_) +
                                              " input, got " + shape_string(x.rows(), x.cols()));
  }
  if (mode == Mode::Float) return from_real(eval_real(to_real(x)), Mode::Float);
  if (!exact_capable_) {
    throw Error(ErrorKind::ModeUnsupported, "block has float weights or irrational activations; exact mode refused");
  }
  ScalarMatrix f = to_mode(x, Mode::Exact);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    ScalarMatrix next(layer.weight.rows(), n_columns_);
    for (std::size_t r = 0; r < layer.weight.rows(); ++r) {
      const auto& terms = sparse_[l][r].exact;
      for (std::size_t c = 0; c < n_columns_; ++c) {
        Rational acc = layer.bias(r, c).rational();
        for (const auto& [j, w] : terms) acc += w.rational() * f(j, c).rational();
        next(r, c) = apply_activation(layer.activations[r], Scalar(std::move(acc)));
      }
    }
    f = std::move(next);
  }
  return f;
}

RealMatrix FfnBlock::eval_real(const RealMatrix& x) const {
  if (x.rows() != input_rows() || x.cols() != n_columns_) {
    throw Error(ErrorKind::ShapeMismatch, "block expects " + shape_string(input_rows(), n_columns_) +
                                              " input, got " + shape_string(x.rows(), x.cols()));
  }
  if (!float_safe_) {
    throw Error(ErrorKind::ModeUnsupported,
                "block holds exact integers beyond 2^53 (or values overflowing binary64); float mode refused");
  }
  RealMatrix f = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    RealMatrix next(layer.weight.rows(), n_columns_);
    for (std::size_t r = 0; r < layer.weight.rows(); ++r) {
      const auto& terms = sparse_[l][r].real;
      for (std::size_t c = 0; c < n_columns_; ++c) {
        double acc = real_bias_[l](r, c);
        for (const auto& [j, w] : terms) acc += w * f(j, c);
        next(r, c) = apply_activation_real(layer.activations[r], acc);
      }
    }
    f = std::move(next);
  }
  return f;
}

ScalarMatrix eval_ffn(const FfnBlock& block, const ScalarMatrix& x, Mode mode) { return block.eval(x, mode); }

FfnBlock broadcast_to_block(const VectorNet& net, std::size_t n_columns) {
  if (net.n_columns() != 1) throw Error(ErrorKind::ShapeMismatch, "broadcast needs a one-column net");
  std::vector<Layer> layers;
  for (const Layer& layer : net.layers()) {
    ScalarMatrix bias(layer.bias.rows(), n_columns);
    for (std::size_t r = 0; r < bias.rows(); ++r) {
      for (std::size_t c = 0; c < n_columns; ++c) bias(r, c) = layer.bias(r, 0);
    }
    layers.push_back(Layer{layer.weight, std::move(bias), layer.activations});
  }
  return FfnBlock(std::move(layers), n_columns);
}

FfnBlock affine_block(const ScalarMatrix& weight, const ScalarMatrix& bias) {
  return FfnBlock({Layer{weight, bias, std::vector<Activation>(weight.rows(), Activation::identity())}}, bias.cols());
}

FfnBlock stack(const FfnBlock& a, const FfnBlock& b) {
  check_same_columns(a, b, "stack");
  if (a.output_rows() != b.input_rows()) {
    throw Error(ErrorKind::ShapeMismatch, "stack: first block emits " + std::to_string(a.output_rows()) +
                                              " rows, second expects " + std::to_string(b.input_rows()));
  }
  std::vector<Layer> layers(a.layers().begin(), a.layers().end() - 1);
  const Layer& last = a.layers().back();
  const Layer& first = b.layers().front();
  ScalarMatrix bias = matmul(first.weight, last.bias);
  for (std::size_t i = 0; i < bias.data().size(); ++i) bias.data()[i] += first.bias.data()[i];
  layers.push_back(Layer{matmul(first.weight, last.weight), std::move(bias), first.activations});
  layers.insert(layers.end(), b.layers().begin() + 1, b.layers().end());
  return FfnBlock(std::move(layers), a.n_columns());
}

FfnBlock stack(std::span<const FfnBlock> blocks) {
  if (blocks.empty()) throw Error(ErrorKind::ShapeMismatch, "stack of zero blocks");
  FfnBlock out = blocks[0];
  for (std::size_t i = 1; i < blocks.size(); ++i) out = stack(out, blocks[i]);
  return out;
}

FfnBlock concat_parallel(std::span<const FfnBlock> blocks) {
  if (blocks.empty()) throw Error(ErrorKind::ShapeMismatch, "concat of zero blocks");
  std::size_t depth = 0;
  for (const FfnBlock& b : blocks) {
    check_same_columns(blocks[0], b, "concat_parallel");
    if (b.input_rows() != blocks[0].input_rows()) {
      throw Error(ErrorKind::ShapeMismatch, "concat_parallel: members read different input sizes");
    }
    depth = std::max(depth, b.depth());
  }
  std::vector<std::vector<Layer>> member;
  for (const FfnBlock& b : blocks) member.push_back(padded_layers(b, depth));

  const std::size_t n = blocks[0].n_columns();
  std::vector<Layer> layers;
  for (std::size_t l = 0; l < depth; ++l) {
    std::size_t rows = 0, cols = 0;
    for (const auto& m : member) {
      rows += m[l].weight.rows();
      cols += m[l].weight.cols();
    }
    if (l == 0) cols = blocks[0].input_rows();
    Layer out{zeros(rows, cols), zeros(rows, n), {}};
    std::size_t r0 = 0, c0 = 0;
    for (const auto& m : member) {
      const Layer& src = m[l];
      for (std::size_t r = 0; r < src.weight.rows(); ++r) {
        for (std::size_t c = 0; c < src.weight.cols(); ++c) out.weight(r0 + r, (l == 0 ? 0 : c0) + c) = src.weight(r, c);
        for (std::size_t c = 0; c < n; ++c) out.bias(r0 + r, c) = src.bias(r, c);
      }
      out.activations.insert(out.activations.end(), src.activations.begin(), src.activations.end());
      r0 += src.weight.rows();
      c0 += src.weight.cols();
    }
    layers.push_back(std::move(out));
  }
  return FfnBlock(std::move(layers), n);
}

FfnBlock block_diagonal(std::span<const FfnBlock> blocks) {
  if (blocks.empty()) throw Error(ErrorKind::ShapeMismatch, "block_diagonal of zero blocks");
  std::size_t depth = 0;
  for (const FfnBlock& b : blocks) {
    check_same_columns(blocks[0], b, "block_diagonal");
    depth = std::max(depth, b.depth());
  }
  std::vector<std::vector<Layer>> member;
  for (const FfnBlock& b : blocks) member.push_back(padded_layers(b, depth));

  const std::size_t n = blocks[0].n_columns();
  std::vector<Layer> layers;
  for (std::size_t l = 0; l < depth; ++l) {
    std::size_t rows = 0, cols = 0;
    for (const auto& m : member) {
      rows += m[l].weight.rows();
      cols += m[l].weight.cols();
    }
    Layer out{zeros(rows, cols), zeros(rows, n), {}};
    std::size_t r0 = 0, c0 = 0;
    for (const auto& m : member) {
      const Layer& src = m[l];
      for (std::size_t r = 0; r < src.weight.rows(); ++r) {
        for (std::size_t c = 0; c < src.weight.cols(); ++c) out.weight(r0 + r, c0 + c) = src.weight(r, c);
        for (std::size_t c = 0; c < n; ++c) out.bias(r0 + r, c) = src.bias(r, c);
      }
      out.activations.insert(out.activations.end(), src.activations.begin(), src.activations.end());
      r0 += src.weight.rows();
      c0 += src.weight.cols();
    }
    layers.push_back(std::move(out));
  }
  return FfnBlock(std::move(layers), n);
}

Json scalar_to_json(const Scalar& s) {
  if (s.is_exact()) return s.to_string();
  return s.to_double();
}

Scalar scalar_from_json(const Json& j) {
  if (j.is_string()) return Scalar::parse_exact(j.get<std::string>());
  if (j.is_number()) return Scalar::real(j.get<double>());
  throw Error(ErrorKind::ParseError, "scalar must be a \"p/q\" string or a number");
}

Json matrix_to_json(const ScalarMatrix& m) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(scalar_to_json(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

ScalarMatrix matrix_from_json(const Json& j) {
  if (!j.is_array()) throw Error(ErrorKind::ParseError, "matrix must be an array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = rows == 0 ? 0 : j[0].size();
  ScalarMatrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw Error(ErrorKind::ParseError, "ragged matrix rows");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = scalar_from_json(j[r][c]);
  }
  return m;
}

Json activation_to_json(const Activation& a) {
  if (a.kind == ActivationKind::Reciprocal) {
    return Json{{"kind", to_string(a.kind)}, {"alpha", a.param_name}, {"alpha_value", a.param_value}};
  }
  if (a.kind == ActivationKind::AnalyticNP) return Json{{"kind", to_string(a.kind)}, {"function", a.param_name}};
  return to_string(a.kind);
}

Activation activation_from_json(const Json& j) {
  if (j.is_string()) return Activation{activation_kind_from_string(j.get<std::string>()), {}, 0.0};
  if (!j.is_object() || !j.contains("kind")) throw Error(ErrorKind::ParseError, "bad activation tag");
  Activation a{activation_kind_from_string(j.at("kind").get<std::string>()), {}, 0.0};
  if (a.kind == ActivationKind::Reciprocal) {
    a.param_name = j.value("alpha", std::string("pi"));
    a.param_value = j.value("alpha_value", std::numbers::pi);
  } else if (a.kind == ActivationKind::AnalyticNP) {
    a.param_name = j.value("function", std::string("exp"));
  }
  return a;
}

Json to_json(const FfnBlock& block) {
  Json layers = Json::array();
  for (const Layer& layer : block.layers()) {
    Json acts = Json::array();
    for (const Activation& a : layer.activations) acts.push_back(activation_to_json(a));
    layers.push_back(Json{{"weight", matrix_to_json(layer.weight)},
                          {"bias", matrix_to_json(layer.bias)},
                          {"activations", std::move(acts)}});
  }
  return Json{{"input_rows", block.input_rows()},
              {"output_rows", block.output_rows()},
              {"n_columns", block.n_columns()},
              {"depth", block.depth()},
              {"width", block.width()},
              {"layers", std::move(layers)}};
}

FfnBlock ffn_from_json(const Json& j) {
  try {
    std::vector<Layer> layers;
    for (const Json& lj : j.at("layers")) {
      Layer layer{matrix_from_json(lj.at("weight")), matrix_from_json(lj.at("bias")), {}};
      for (const Json& a : lj.at("activations")) layer.activations.push_back(activation_from_json(a));
      layers.push_back(std::move(layer));
    }
    return FfnBlock(std::move(layers), j.at("n_columns").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("feedforward block: ") + e.what());
  }
}

}  // namespace kst
