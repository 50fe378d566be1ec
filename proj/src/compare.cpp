#include "kfgrad/compare.hpp"

namespace kfgrad {

Discrepancy compare(const Mat& actual, const Mat& reference) {
  if (actual.rows() != reference.rows() || actual.cols() != reference.cols()) {
    throw DimensionError("compare: shape mismatch");
  }
  Discrepancy d;
  d.scale = reference.size() ? reference.cwiseAbs().maxCoeff() : 0.0;
  for (Index i = 0; i < actual.rows(); ++i) {
    for (Index j = 0; j < actual.cols(); ++j) {
      const double e = std::abs(actual(i, j) - reference(i, j));
      if (e > d.max_abs || (i == 0 && j == 0)) {
        d.max_abs = e;
        d.row = i;
        d.col = j;
        d.actual = actual(i, j);
        d.reference = reference(i, j);
      }
    }
  }
  d.relative = d.scale > 0.0 ? d.max_abs / d.scale : d.max_abs;
  return d;
}

}  // namespace kfgrad
