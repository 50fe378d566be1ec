#pragma once

#include <cstddef>
#include <vector>

#include "kfgrad/matrix.hpp"

namespace kfgrad {

// A model quantity that is either one value shared by every step or one value
// per step. Steps are addressed 0-based: index k holds the value for filter
// step n = k + 1.
template <class T>
class StepSeries {
 public:
  StepSeries() = default;
  StepSeries(T value) : values_{std::move(value)} {}  // NOLINT: implicit static value

  static StepSeries per_step(std::vector<T> values) {
    StepSeries s;
    s.values_ = std::move(values);
    s.per_step_ = true;
    return s;
  }

  bool empty() const noexcept { return values_.empty(); }
  bool is_static() const noexcept { return !per_step_; }
  std::size_t stored() const noexcept { return values_.size(); }

  const T& at(std::size_t k) const { return per_step_ ? values_.at(k) : values_.front(); }
  T& mutable_at(std::size_t k) { return per_step_ ? values_.at(k) : values_.front(); }

  // Turns a static series into n identical per-step copies.
  void expand(std::size_t n) {
    if (per_step_) return;
    T v = values_.empty() ? T{} : values_.front();
    values_.assign(n, v);
    per_step_ = true;
  }

  const std::vector<T>& values() const noexcept { return values_; }

 private:
  std::vector<T> values_;
  bool per_step_ = false;
};

// Linear-Gaussian system
//   x̂ₙ|ₙ₋₁ = Fₙ x̂ₙ₋₁|ₙ₋₁ + Bₙ uₙ,   yₙ = Hₙ xₙ + vₙ,
// with process covariance Qₙ, measurement covariance Rₙ and the filter seeded
// by the posterior (x0, P0) at step 0.
struct FilterModel {
  StepSeries<Mat> F;
  StepSeries<Mat> B;  // empty when the model has no inputs
  StepSeries<Mat> H;
  StepSeries<Mat> Q;
  StepSeries<Mat> R;
  Mat P0;
  Vec x0;
  std::vector<Vec> u;  // u[k] is the input for step k + 1; empty when B is

  Index state_dim() const noexcept { return x0.size(); }
  Index meas_dim() const { return H.empty() ? 0 : H.at(0).rows(); }
  Index input_dim() const { return B.empty() ? 0 : B.at(0).cols(); }
  bool has_inputs() const noexcept { return !B.empty(); }

  // Shape and finiteness checks against a run of `steps` measurements.
  // Throws DimensionError / InvalidArgument / NumericalError.
  void validate(std::size_t steps) const;
};

}  // namespace kfgrad
