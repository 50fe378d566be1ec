#pragma once

#include "kfgrad/matrix.hpp"

namespace kfgrad {

// Entry-wise agreement of `actual` with `reference`, each entry judged
// against the reference object's scale: |aᵢⱼ − bᵢⱼ| ≤ rtol·max|b| + atol.
struct Discrepancy {
  double max_abs = 0.0;   // max |aᵢⱼ − bᵢⱼ|
  double scale = 0.0;     // max |bᵢⱼ|
  double relative = 0.0;  // max_abs / scale (max_abs when scale is 0)
  Index row = 0;
  Index col = 0;
  double actual = 0.0;
  double reference = 0.0;

  bool within(double rtol, double atol) const { return max_abs <= rtol * scale + atol; }
};

Discrepancy compare(const Mat& actual, const Mat& reference);

}  // namespace kfgrad
