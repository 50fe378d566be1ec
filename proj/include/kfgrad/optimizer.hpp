#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "kfgrad/loss.hpp"
#include "kfgrad/model.hpp"
#include "kfgrad/selector.hpp"

namespace kfgrad {

enum class GradientMethod { backward, sensitivity };

struct FitConfig {
  std::vector<Target> targets{Target::R};  // any of R, Q, P0; each fitted through L with M = L·Lᵀ
  double alpha = 0.005;
  std::size_t max_iters = 100;
  // Starting factors; a target without an entry starts from default_initial_factor.
  std::map<Target, Mat> init_factors;
  // Stop once |𝓛ₖ − 𝓛ₖ₋₁| / |𝓛ₖ₋₁| < stop_tol. Zero disables.
  double stop_tol = 0.0;
  GradientMethod method = GradientMethod::backward;

  void validate() const;
};

// loss_history[k] and grad_norm_history[k] are measured at the k-th iterate,
// so both hold iterations + 1 entries (the last one at the final parameters).
struct FitReport {
  std::vector<double> loss_history;
  std::vector<double> grad_norm_history;
  std::vector<double> wall_ms;  // cumulative, per recorded iterate
  std::map<Target, Mat> initial_factors;
  std::map<Target, Mat> factors;
  std::map<Target, Mat> covariances;
  std::size_t iterations = 0;
  std::size_t backtracks = 0;  // diagonal-step halvings
  bool converged = false;      // stopped by stop_tol
  double alpha = 0.0;
  double wall_time_ms = 0.0;
};

// chol(scale · (tr M / dim) · I)
Mat default_initial_factor(const Mat& current, double scale = 4.0);

// Fixed-step gradient descent L ← L − α·∂𝓛/∂L on the selected factors.
// A step that would make a diagonal entry of L non-positive is halved for
// that entry, up to 20 times; past that the fit fails. Filter failures and
// non-finite losses raise NumericalError naming the iteration.
FitReport fit(const FilterModel& model, std::span<const Vec> ys, const LossSpec& spec,
              const FitConfig& cfg);

// Model with every fitted covariance replaced by L·Lᵀ.
FilterModel apply_factors(FilterModel model, const std::map<Target, Mat>& factors);

}  // namespace kfgrad
