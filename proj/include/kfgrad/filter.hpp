#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "kfgrad/matrix.hpp"
#include "kfgrad/model.hpp"

namespace kfgrad {

// Cholesky factor and explicit inverse of a measurement covariance Rₙ.
struct NoiseFactor {
  SpdFactor factor;
  Mat inverse;
};

NoiseFactor factor_noise(const Mat& r);

struct Prediction {
  Vec x;  // x̂ₙ|ₙ₋₁
  Mat P;  // Pₙ|ₙ₋₁
};

// Everything the loss and the backward pass read about one filter step.
struct StepRecord {
  Vec x_prior;  // x̂ₙ|ₙ₋₁
  Vec x_post;   // x̂ₙ|ₙ
  Mat P_prior;  // Pₙ|ₙ₋₁
  Mat P_post;   // Pₙ|ₙ
  Mat K;        // gain, d x m
  Vec z;        // innovation yₙ − Hₙ x̂ₙ|ₙ₋₁
  SpdFactor S_factor;
  Vec Sinv_z;   // Sₙ⁻¹ zₙ
  Vec Rinv_z;   // Rₙ⁻¹ zₙ
  Mat IKH;      // I − Kₙ Hₙ
  Vec y;
};

class FilterTape {
 public:
  FilterTape(std::shared_ptr<const FilterModel> model, std::vector<StepRecord> steps,
             std::vector<NoiseFactor> noise);

  const FilterModel& model() const noexcept { return *model_; }
  std::size_t size() const noexcept { return steps_.size(); }
  const StepRecord& step(std::size_t k) const { return steps_.at(k); }
  const std::vector<StepRecord>& steps() const noexcept { return steps_; }

  const NoiseFactor& noise(std::size_t k) const {
    return noise_.size() == 1 ? noise_.front() : noise_.at(k);
  }

  // Sₙ⁻¹ formed as Rₙ⁻¹(I − Hₙ Kₙ), symmetrized. No factorization involved.
  Mat innovation_precision(std::size_t k) const;

 private:
  std::shared_ptr<const FilterModel> model_;
  std::vector<StepRecord> steps_;
  std::vector<NoiseFactor> noise_;
};

// Step index k is 0-based (filter step n = k + 1).
Prediction predict(const Vec& x_post_prev, const Mat& P_post_prev, const FilterModel& model,
                   std::size_t k);

StepRecord update(const Vec& x_prior, const Mat& P_prior, const Vec& y, const FilterModel& model,
                  std::size_t k, const NoiseFactor& noise);
StepRecord update(const Vec& x_prior, const Mat& P_prior, const Vec& y, const FilterModel& model,
                  std::size_t k);

// Runs predict/update over every measurement, seeded by (x0, P0).
// Throws NotPositiveDefinite carrying the 1-based step when Rₙ or Sₙ is not SPD.
FilterTape run_filter(FilterModel model, std::span<const Vec> ys);
FilterTape run_filter(std::shared_ptr<const FilterModel> model, std::span<const Vec> ys);

}  // namespace kfgrad
