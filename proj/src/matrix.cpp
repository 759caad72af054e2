#include "kst/matrix.hpp"

namespace kst {

bool identical(const Scalar& a, const Scalar& b) { return a.mode() == b.mode() && a == b; }

bool identical(const ScalarMatrix& a, const ScalarMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    if (!identical(a.data()[i], b.data()[i])) return false;
  }
  return true;
}

ScalarMatrix matmul(const ScalarMatrix& a, const ScalarMatrix& b) {
  if (a.cols() != b.rows()) {
    throw Error(ErrorKind::ShapeMismatch,
                "matmul " + shape_string(a.rows(), a.cols()) + " * " + shape_string(b.rows(), b.cols()));
  }
  const Mode mode = a.empty() ? (b.empty() ? Mode::Exact : b.data()[0].mode()) : a.data()[0].mode();
  ScalarMatrix out = zeros(a.rows(), b.cols(), mode);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const Scalar& aik = a(i, k);
      if (aik.is_zero()) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) {
        if (b(k, j).is_zero()) continue;
        out(i, j) += aik * b(k, j);
      }
    }
  }
  return out;
}

std::string shape_string(std::size_t rows, std::size_t cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace kst
