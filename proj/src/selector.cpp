#include "kfgrad/selector.hpp"

#include <string>

namespace kfgrad {

namespace {

const Mat& base_matrix(const FilterModel& model, Target t, std::size_t k) {
  switch (t) {
    case Target::P0:
    case Target::LP0:
      return model.P0;
    case Target::Q:
    case Target::LQ:
      return model.Q.at(k);
    case Target::R:
    case Target::LR:
      return model.R.at(k);
    default:
      throw InvalidArgument("selector: target has no matrix");
  }
}

Index target_dim(const FilterModel& model, Target t) {
  switch (t) {
    case Target::P0:
    case Target::Q:
    case Target::LP0:
    case Target::LQ:
    case Target::X0:
      return model.state_dim();
    default:
      return model.meas_dim();
  }
}

void set_matrix(FilterModel& model, Target t, std::optional<std::size_t> step, std::size_t steps,
                Mat value) {
  switch (t) {
    case Target::P0:
    case Target::LP0:
      model.P0 = std::move(value);
      return;
    case Target::Q:
    case Target::LQ:
      if (step) {
        model.Q.expand(steps);
        model.Q.mutable_at(*step) = std::move(value);
      } else if (model.Q.is_static()) {
        model.Q = StepSeries<Mat>(std::move(value));
      } else {
        throw InvalidArgument("selector: time-varying Q needs a step");
      }
      return;
    case Target::R:
    case Target::LR:
      if (step) {
        model.R.expand(steps);
        model.R.mutable_at(*step) = std::move(value);
      } else if (model.R.is_static()) {
        model.R = StepSeries<Mat>(std::move(value));
      } else {
        throw InvalidArgument("selector: time-varying R needs a step");
      }
      return;
    default:
      throw InvalidArgument("selector: target has no matrix");
  }
}

}  // namespace

std::string_view to_string(Target t) noexcept {
  switch (t) {
    case Target::P0: return "P0";
    case Target::Q: return "Q";
    case Target::R: return "R";
    case Target::X0: return "x0";
    case Target::Y: return "y";
    case Target::LP0: return "L_P0";
    case Target::LQ: return "L_Q";
    case Target::LR: return "L_R";
  }
  return "?";
}

Target parse_target(std::string_view s) {
  for (Target t : {Target::P0, Target::Q, Target::R, Target::X0, Target::Y, Target::LP0,
                   Target::LQ, Target::LR}) {
    if (s == to_string(t)) return t;
  }
  throw InvalidArgument("unknown target '" + std::string(s) + "'");
}

bool is_symmetric_target(Target t) noexcept {
  return t == Target::P0 || t == Target::Q || t == Target::R;
}

bool is_factor_target(Target t) noexcept {
  return t == Target::LP0 || t == Target::LQ || t == Target::LR;
}

void validate(const ParamSelector& sel, const FilterModel& model, std::size_t steps) {
  const Index dim = target_dim(model, sel.target);
  auto fail = [&](const std::string& why) {
    throw InvalidArgument("invalid selector on " + std::string(to_string(sel.target)) + ": " + why);
  };
  if (sel.row < 0 || sel.row >= dim) fail("row out of range");
  if (sel.step && *sel.step >= steps) fail("step out of range");
  switch (sel.target) {
    case Target::X0:
      if (sel.step) fail("x0 has no step");
      break;
    case Target::Y:
      if (!sel.step) fail("y needs a step");
      break;
    case Target::P0:
    case Target::LP0:
      if (sel.step) fail("P0 has no step");
      [[fallthrough]];
    default:
      if (sel.col < 0 || sel.col >= dim) fail("column out of range");
      if (is_factor_target(sel.target) && sel.col > sel.row) fail("factor entry above diagonal");
      if (!sel.step && sel.target != Target::P0 && sel.target != Target::LP0) {
        const auto& series = (sel.target == Target::Q || sel.target == Target::LQ) ? model.Q
                                                                                    : model.R;
        if (!series.is_static()) fail("time-varying parameter needs a step");
      }
  }
}

double coordinate_value(const FilterModel& model, std::span<const Vec> ys,
                        const ParamSelector& sel) {
  const std::size_t k = sel.step.value_or(0);
  switch (sel.target) {
    case Target::X0:
      return model.x0(sel.row);
    case Target::Y:
      return ys[k](sel.row);
    case Target::LP0:
    case Target::LQ:
    case Target::LR:
      return cholesky(base_matrix(model, sel.target, k)).lower()(sel.row, sel.col);
    default:
      return base_matrix(model, sel.target, k)(sel.row, sel.col);
  }
}

void perturb(FilterModel& model, std::vector<Vec>& ys, const ParamSelector& sel, double delta) {
  validate(sel, model, ys.size());
  const std::size_t k = sel.step.value_or(0);
  switch (sel.target) {
    case Target::X0:
      model.x0(sel.row) += delta;
      return;
    case Target::Y:
      ys[k](sel.row) += delta;
      return;
    case Target::LP0:
    case Target::LQ:
    case Target::LR: {
      Mat l = cholesky(base_matrix(model, sel.target, k)).lower();
      l(sel.row, sel.col) += delta;
      set_matrix(model, sel.target, sel.step, ys.size(), multiply_nt(l, l));
      return;
    }
    default: {
      Mat m = base_matrix(model, sel.target, k);
      m(sel.row, sel.col) += delta;
      if (sel.symmetric_pair && sel.row != sel.col) m(sel.col, sel.row) += delta;
      set_matrix(model, sel.target, sel.step, ys.size(), std::move(m));
    }
  }
}

Mat tangent(const FilterModel& model, const ParamSelector& sel) {
  const std::size_t k = sel.step.value_or(0);
  const Index dim = target_dim(model, sel.target);
  Mat e = Mat::Zero(dim, dim);
  if (is_factor_target(sel.target)) {
    const Mat l = cholesky(base_matrix(model, sel.target, k)).lower();
    // d(L Lᵀ)/dLᵢⱼ = Eᵢⱼ Lᵀ + L Eⱼᵢ
    e.row(sel.row) += l.col(sel.col).transpose();
    e.col(sel.row) += l.col(sel.col);
    return e;
  }
  if (!is_symmetric_target(sel.target)) throw InvalidArgument("tangent: not a matrix target");
  e(sel.row, sel.col) = 1.0;
  if (sel.symmetric_pair) e(sel.col, sel.row) = 1.0;
  return e;
}

std::vector<ParamSelector> selectors_for(Target target, const FilterModel& model,
                                         std::size_t steps, std::optional<std::size_t> step) {
  std::vector<ParamSelector> out;
  const Index dim = target_dim(model, target);
  switch (target) {
    case Target::X0:
      for (Index i = 0; i < dim; ++i) out.push_back({target, i, 0, std::nullopt, false});
      break;
    case Target::Y:
      for (std::size_t k = 0; k < steps; ++k)
        for (Index i = 0; i < dim; ++i) out.push_back({target, i, 0, k, false});
      break;
    default:
      for (Index i = 0; i < dim; ++i)
        for (Index j = 0; j <= i; ++j)
          out.push_back({target, i, j, step, is_symmetric_target(target)});
  }
  for (const auto& s : out) validate(s, model, steps);
  return out;
}

Mat assemble(Target target, std::span<const ParamSelector> sels, std::span<const double> values,
             const FilterModel& model, std::size_t steps) {
  if (sels.size() != values.size()) throw DimensionError("assemble: size mismatch");
  const Index dim = target_dim(model, target);
  Mat g;
  if (target == Target::X0) {
    g = Mat::Zero(dim, 1);
  } else if (target == Target::Y) {
    g = Mat::Zero(static_cast<Index>(steps), dim);
  } else {
    g = Mat::Zero(dim, dim);
  }
  for (std::size_t s = 0; s < sels.size(); ++s) {
    const ParamSelector& sel = sels[s];
    if (sel.target != target) throw InvalidArgument("assemble: selector target mismatch");
    const double v = values[s];
    if (target == Target::X0) {
      g(sel.row, 0) = v;
    } else if (target == Target::Y) {
      g(static_cast<Index>(*sel.step), sel.row) = v;
    } else if (is_factor_target(target) || !sel.symmetric_pair) {
      g(sel.row, sel.col) = v;
    } else if (sel.row == sel.col) {
      g(sel.row, sel.col) = v;
    } else {
      g(sel.row, sel.col) = 0.5 * v;
      g(sel.col, sel.row) = 0.5 * v;
    }
  }
  return g;
}

}  // namespace kfgrad
