#pragma once

#include <span>

#include "kfgrad/loss.hpp"
#include "kfgrad/model.hpp"
#include "kfgrad/parallel.hpp"
#include "kfgrad/selector.hpp"

namespace kfgrad {

// Derivatives of the filter quantities w.r.t. the selected scalar parameter
// at the current step.
struct SensState {
  Vec dx_prior;
  Vec dx_post;
  Mat dP_prior;
  Mat dP_post;
  Vec dz;
  Mat dS;
  Mat dK;
};

// d𝓛/dα for the selected coordinate α, by propagating the termwise
// derivative of every filter equation forward alongside the filter and
// contracting with the loss's local gradients at each step. Runs its own
// filter pass.
double forward_sensitivity(const FilterModel& model, std::span<const Vec> ys, const LossSpec& spec,
                           const ParamSelector& sel);

// Full gradient of `target` assembled from one forward_sensitivity call per
// coordinate (lower triangle for matrix targets). Cost grows with the number
// of coordinates times a full filter pass. `step` restricts Q/R to one step.
Mat full_gradient_forward(const FilterModel& model, std::span<const Vec> ys, const LossSpec& spec,
                          Target target, ExecPolicy policy = ExecPolicy::serial,
                          std::optional<std::size_t> step = std::nullopt);

}  // namespace kfgrad
