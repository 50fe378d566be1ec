#include "kfgrad/fd_oracle.hpp"

#include <string>
#include <vector>

#include "kfgrad/filter.hpp"

namespace kfgrad {

double evaluate_loss(const FilterModel& model, std::span<const Vec> ys, const LossSpec& spec) {
  return total_loss(run_filter(model, ys), spec);
}

namespace {

double shifted_loss(const FilterModel& model, std::span<const Vec> ys, const LossSpec& spec,
                    const ParamSelector& sel, double delta) {
  FilterModel m = model;
  std::vector<Vec> y(ys.begin(), ys.end());
  try {
    perturb(m, y, sel, delta);
    return evaluate_loss(m, y, spec);
  } catch (const NotPositiveDefinite& e) {
    throw FdPerturbationError(
        "finite-difference perturbation of " + std::string(to_string(sel.target)) + "(" +
        std::to_string(sel.row) + "," + std::to_string(sel.col) + ") by " + std::to_string(delta) +
        " broke positive definiteness (" + e.what() +
        "); shrink the step or perturb the square-root factor instead");
  }
}

}  // namespace

double fd_central(const FilterModel& model, std::span<const Vec> ys, const LossSpec& spec,
                  const ParamSelector& sel, double h) {
  if (!(h > 0.0)) throw InvalidArgument("fd_central: step must be positive");
  validate(sel, model, ys.size());
  return (shifted_loss(model, ys, spec, sel, h) - shifted_loss(model, ys, spec, sel, -h)) / (2.0 * h);
}

double fd_gradient(const FilterModel& model, std::span<const Vec> ys, const LossSpec& spec,
                   const ParamSelector& sel, const FdConfig& cfg) {
  validate(sel, model, ys.size());
  const double h = cfg.step_for(coordinate_value(model, ys, sel));
  const double coarse = fd_central(model, ys, spec, sel, h);
  if (!cfg.richardson) return coarse;
  const double fine = fd_central(model, ys, spec, sel, 0.5 * h);
  return (4.0 * fine - coarse) / 3.0;
}

Mat fd_full(const FilterModel& model, std::span<const Vec> ys, const LossSpec& spec, Target target,
            const FdConfig& cfg, ExecPolicy policy, std::optional<std::size_t> step) {
  const auto sels = selectors_for(target, model, ys.size(), step);
  std::vector<double> values(sels.size());
  for_each_index(sels.size(), policy,
                 [&](std::size_t i) { values[i] = fd_gradient(model, ys, spec, sels[i], cfg); });
  return assemble(target, sels, values, model, ys.size());
}

}  // namespace kfgrad
