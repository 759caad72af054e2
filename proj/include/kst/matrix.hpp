#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "kst/scalar.hpp"

namespace kst {

// Dense row-major matrix.
template <class T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, const T& fill = T()) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  const std::vector<T>& data() const { return data_; }
  std::vector<T>& data() { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using ScalarMatrix = Matrix<Scalar>;
using RealMatrix = Matrix<double>;

inline ScalarMatrix zeros(std::size_t rows, std::size_t cols, Mode mode = Mode::Exact) {
  return ScalarMatrix(rows, cols, Scalar::zero(mode));
}

inline ScalarMatrix identity_matrix(std::size_t n, Mode mode = Mode::Exact) {
  ScalarMatrix m = zeros(n, n, mode);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = Scalar::one(mode);
  return m;
}

inline ScalarMatrix to_mode(const ScalarMatrix& m, Mode mode) {
  ScalarMatrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.data().size(); ++i) out.data()[i] = m.data()[i].to_mode(mode);
  return out;
}

// Exact when mode is Exact (doubles are dyadic rationals).
inline ScalarMatrix from_real(const RealMatrix& m, Mode mode) {
  ScalarMatrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.data().size(); ++i) {
    out.data()[i] = mode == Mode::Exact ? Scalar::exact_from_double(m.data()[i]) : Scalar::real(m.data()[i]);
  }
  return out;
}

inline RealMatrix to_real(const ScalarMatrix& m) {
  RealMatrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.data().size(); ++i) out.data()[i] = m.data()[i].to_double();
  return out;
}

// Same mode and same value; never throws on mixed modes.
bool identical(const Scalar& a, const Scalar& b);
bool identical(const ScalarMatrix& a, const ScalarMatrix& b);

ScalarMatrix matmul(const ScalarMatrix& a, const ScalarMatrix& b);
std::string shape_string(std::size_t rows, std::size_t cols);

}  // namespace kst
