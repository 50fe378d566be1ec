#include "kfgrad/model.hpp"

#include <cmath>
#include <string>

namespace kfgrad {

namespace {

void check_series(const StepSeries<Mat>& s, const char* name, Index rows, Index cols,
                  std::size_t steps, bool symmetric) {
  if (s.empty()) throw InvalidArgument(std::string("model: ") + name + " is missing");
  if (!s.is_static() && s.stored() != steps) {
    throw DimensionError(std::string("model: ") + name + " has " + std::to_string(s.stored()) +
                         " per-step values, expected " + std::to_string(steps));
  }
  for (const Mat& m : s.values()) {
    if (m.rows() != rows || m.cols() != cols) {
      throw DimensionError(std::string("model: ") + name + " is " + std::to_string(m.rows()) +
                           "x" + std::to_string(m.cols()) + ", expected " +
                           std::to_string(rows) + "x" + std::to_string(cols));
    }
    require_finite(m, name);
    if (symmetric && (m - m.transpose()).norm() > kSymmetryTolerance * std::max(1.0, m.norm())) {
      throw InvalidArgument(std::string("model: ") + name + " is not symmetric");
    }
  }
}

}  // namespace

void FilterModel::validate(std::size_t steps) const {
  const Index d = state_dim();
  if (d == 0) throw InvalidArgument("model: x0 is empty");
  require_finite(x0, "x0");
  if (P0.rows() != d || P0.cols() != d) throw DimensionError("model: P0 must be d x d");
  require_finite(P0, "P0");
  if ((P0 - P0.transpose()).norm() > kSymmetryTolerance * std::max(1.0, P0.norm())) {
    throw InvalidArgument("model: P0 is not symmetric");
  }
  if (H.empty()) throw InvalidArgument("model: H is missing");
  const Index m = meas_dim();
  if (m == 0) throw InvalidArgument("model: H has no rows");
  check_series(F, "F", d, d, steps, false);
  check_series(H, "H", m, d, steps, false);
  check_series(Q, "Q", d, d, steps, true);
  check_series(R, "R", m, m, steps, true);
  if (has_inputs()) {
    const Index p = input_dim();
    check_series(B, "B", d, p, steps, false);
    if (u.size() != steps) {
      throw DimensionError("model: " + std::to_string(u.size()) + " inputs for " +
                           std::to_string(steps) + " steps");
    }
    for (const Vec& v : u) {
      if (v.size() != p) throw DimensionError("model: input vector has wrong size");
      require_finite(v, "u");
    }
  } else if (!u.empty()) {
    throw InvalidArgument("model: inputs given but B is missing");
  }
}

}  // namespace kfgrad
