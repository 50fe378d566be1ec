#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "kfgrad/model.hpp"

namespace kfgrad {

// Differentiable model inputs. LP0/LQ/LR address the lower-triangular
// Cholesky factor of P0/Q/R (M = L·Lᵀ) rather than the matrix itself.
enum class Target { P0, Q, R, X0, Y, LP0, LQ, LR };

std::string_view to_string(Target t) noexcept;
Target parse_target(std::string_view s);  // throws InvalidArgument

bool is_symmetric_target(Target t) noexcept;  // P0, Q, R
bool is_factor_target(Target t) noexcept;     // LP0, LQ, LR

// One scalar coordinate of one parameter.
//   P0/Q/R/LP0/LQ/LR: (row, col); Y: row = measurement component, step required;
//   X0: row = state component.
// `step` (0-based) restricts a Q/R/Y perturbation to a single filter step;
// without it Q and R are perturbed at every step.
// With symmetric_pair, (row, col) and (col, row) move together; the
// derivative for an off-diagonal pair is twice the gradient entry.
struct ParamSelector {
  Target target = Target::P0;
  Index row = 0;
  Index col = 0;
  std::optional<std::size_t> step;
  bool symmetric_pair = true;
};

void validate(const ParamSelector& sel, const FilterModel& model, std::size_t steps);

// Current value of the selected coordinate.
double coordinate_value(const FilterModel& model, std::span<const Vec> ys,
                        const ParamSelector& sel);

// Adds `delta` to the selected coordinate (to both entries of a symmetric
// pair). Factor targets rebuild the matrix from the perturbed factor.
void perturb(FilterModel& model, std::vector<Vec>& ys, const ParamSelector& sel, double delta);

// dM/dα for the matrix parameter behind a matrix selector: the symmetric-pair
// unit matrix for P0/Q/R, Eᵢⱼ·Lᵀ + L·Eⱼᵢ for factor targets.
Mat tangent(const FilterModel& model, const ParamSelector& sel);

// Every selector needed to assemble the full gradient of `target`. Symmetric
// targets and factor targets enumerate the lower triangle.
std::vector<ParamSelector> selectors_for(Target target, const FilterModel& model,
                                         std::size_t steps,
                                         std::optional<std::size_t> step = std::nullopt);

// Inverse of selectors_for: builds the gradient matrix from per-selector
// derivatives (halving symmetric-pair off-diagonals). X0 yields d x 1, Y
// yields steps x m (row k = step k).
Mat assemble(Target target, std::span<const ParamSelector> sels, std::span<const double> values,
             const FilterModel& model, std::size_t steps);

}  // namespace kfgrad
