#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>

#include "kfgrad/loss.hpp"
#include "kfgrad/model.hpp"
#include "kfgrad/parallel.hpp"
#include "kfgrad/selector.hpp"

namespace kfgrad {

struct FdConfig {
  // h = relative_step · max(1, |θ|)
  double relative_step = std::cbrt(std::numeric_limits<double>::epsilon());
  // One level of Richardson extrapolation: (4·D(h/2) − D(h)) / 3.
  bool richardson = false;

  double step_for(double theta) const { return relative_step * std::max(1.0, std::abs(theta)); }

  // Richardson on a wider step. Truncation error drops to O(h⁴), so the step
  // can grow until rounding noise in the loss no longer dominates.
  static FdConfig extrapolated() {
    FdConfig c;
    c.relative_step = 1e-3;
    c.richardson = true;
    return c;
  }
};

// A perturbed parameter was no longer positive definite.
class FdPerturbationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Loss of the whole pipeline (model → filter → loss).
double evaluate_loss(const FilterModel& model, std::span<const Vec> ys, const LossSpec& spec);

// Central difference (𝓛(θ+h) − 𝓛(θ−h)) / 2h on the selected coordinate.
// For an off-diagonal symmetric pair this is twice the gradient entry.
double fd_gradient(const FilterModel& model, std::span<const Vec> ys, const LossSpec& spec,
                   const ParamSelector& sel, const FdConfig& cfg = {});

// Plain central difference with an explicit step, no Richardson.
double fd_central(const FilterModel& model, std::span<const Vec> ys, const LossSpec& spec,
                  const ParamSelector& sel, double h);

// Full gradient matrix assembled like full_gradient_forward.
Mat fd_full(const FilterModel& model, std::span<const Vec> ys, const LossSpec& spec, Target target,
            const FdConfig& cfg = {}, ExecPolicy policy = ExecPolicy::serial,
            std::optional<std::size_t> step = std::nullopt);

}  // namespace kfgrad
