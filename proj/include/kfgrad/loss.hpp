#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "kfgrad/filter.hpp"

namespace kfgrad {

// Partial derivatives of one step's loss terms. Matrix entries are
// symmetric-part gradients.
struct LossLocalGrads {
  Vec dl_xprior;  // ∂lₙ|ₙ₋₁/∂x̂ₙ|ₙ₋₁
  Mat dl_Pprior;  // ∂lₙ|ₙ₋₁/∂Pₙ|ₙ₋₁
  Mat dl_R;       // ∂lₙ|ₙ₋₁/∂Rₙ
  Vec dl_y;       // ∂lₙ|ₙ₋₁/∂yₙ
  Vec dl_xpost;   // ∂lₙ|ₙ/∂x̂ₙ|ₙ
  Mat dl_Ppost;   // ∂lₙ|ₙ/∂Pₙ|ₙ

  static LossLocalGrads zeros(Index d, Index m);
};

struct StepLoss {
  double prior = 0.0;      // lₙ|ₙ₋₁
  double posterior = 0.0;  // lₙ|ₙ
  LossLocalGrads grads;
};

// A loss 𝓛 = Σₙ (lₙ|ₙ + lₙ|ₙ₋₁) where the prior term may depend on
// (x̂ₙ|ₙ₋₁, Pₙ|ₙ₋₁, Rₙ, yₙ) and the posterior term on (x̂ₙ|ₙ, Pₙ|ₙ).
// Implementations must be stateless with respect to evaluation.
class LossSpec {
 public:
  virtual ~LossSpec() = default;
  virtual StepLoss evaluate(const FilterTape& tape, std::size_t k) const = 0;
  virtual std::string_view name() const = 0;
};

class ZeroLoss final : public LossSpec {
 public:
  StepLoss evaluate(const FilterTape& tape, std::size_t k) const override;
  std::string_view name() const override { return "zero"; }
};

// Innovation energy log det Sₙ + zₙᵀ Sₙ⁻¹ zₙ (negative log-likelihood without
// the (N·m/2)·log 2π constant and without the ½ factor).
class NllLoss final : public LossSpec {
 public:
  StepLoss evaluate(const FilterTape& tape, std::size_t k) const override;
  std::string_view name() const override { return "nll"; }
};

// Weighted squared error of the posterior mean against ground-truth states.
class MseLoss final : public LossSpec {
 public:
  MseLoss(std::vector<Vec> truth, Mat weight);
  StepLoss evaluate(const FilterTape& tape, std::size_t k) const override;
  std::string_view name() const override { return "mse"; }

  const std::vector<Vec>& truth() const noexcept { return truth_; }
  const Mat& weight() const noexcept { return weight_; }

 private:
  std::vector<Vec> truth_;
  Mat weight_;
};

StepLoss nll_step(const FilterTape& tape, std::size_t k);
StepLoss mse_step(const StepRecord& rec, const Vec& truth_state, const Mat& weight);

double total_loss(const FilterTape& tape, const LossSpec& spec);

}  // namespace kfgrad
