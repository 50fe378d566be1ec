#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "kfgrad/filter.hpp"
#include "kfgrad/loss.hpp"

namespace kfgrad {

// Output of one reverse pass. Matrix gradients are symmetric-part gradients
// and exactly symmetric. Per-step vectors are indexed 0-based by step.
struct GradientSet {
  double loss = 0.0;
  Mat dP0;                    // ∂𝓛/∂P0 (P0 treated as the step-0 posterior)
  Vec dx0;                    // ∂𝓛/∂x̂0|0
  std::vector<Mat> dQ_steps;  // ∂𝓛/∂Qₙ
  std::vector<Mat> dR_steps;  // ∂𝓛/∂Rₙ
  Mat dQ_static;              // Σₙ ∂𝓛/∂Qₙ
  Mat dR_static;              // Σₙ ∂𝓛/∂Rₙ
  std::vector<Vec> dy;        // ∂𝓛/∂yₙ
  // Gradients w.r.t. the lower Cholesky factor of each static covariance.
  // Present only when requested and the covariance is SPD.
  std::optional<Mat> dL_P0;
  std::optional<Mat> dL_Q;
  std::optional<Mat> dL_R;
};

struct BackwardOptions {
  bool factor_gradients = false;
};

// Reverse recursion from step N down to 1. Performs no factorizations: every
// Sₙ⁻¹ / Rₙ⁻¹ product reuses tape data. Factor gradients for Q and P0 (when
// requested) factor those parameters once after the pass.
GradientSet backward(const FilterTape& tape, const LossSpec& spec, BackwardOptions opts = {});

// ∂𝓛/∂L = 2·(∂𝓛/∂M)·L for M = L·Lᵀ, with entries above the diagonal zeroed.
Mat sqrt_factor_grad(const Mat& dM, const Mat& L);

struct ParamTag {
  enum class Kind { P0, Q_static, R_static, Q_step, R_step, y, x0, L_of_R, L_of_Q, L_of_P0 };
  Kind kind;
  std::size_t step = 0;  // for Q_step, R_step, y
};

// Single-parameter convenience wrappers. Vectors come back as d x 1 / m x 1.
Mat grad_wrt(const FilterTape& tape, const LossSpec& spec, ParamTag which);
Mat grad_wrt(const GradientSet& grads, const FilterModel& model, ParamTag which);

}  // namespace kfgrad
