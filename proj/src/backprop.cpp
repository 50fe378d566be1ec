#include "kfgrad/backprop.hpp"

#include <string>

namespace kfgrad {

namespace {

void check_local(const LossLocalGrads& g, Index d, Index m, std::size_t k) {
  const bool ok = g.dl_xprior.size() == d && g.dl_Pprior.rows() == d && g.dl_Pprior.cols() == d &&
                  g.dl_R.rows() == m && g.dl_R.cols() == m && g.dl_y.size() == m &&
                  g.dl_xpost.size() == d && g.dl_Ppost.rows() == d && g.dl_Ppost.cols() == d;
  if (!ok) {
    throw DimensionError("backward: loss gradients at step " + std::to_string(k + 1) +
                         " do not match the tape dimensions");
  }
}

std::optional<Mat> factor_grad_if_spd(const Mat& dM, const Mat& m) {
  try {
    return sqrt_factor_grad(dM, cholesky(m).lower());
  } catch (const NumericalError&) {
    return std::nullopt;
  }
}

}  // namespace

GradientSet backward(const FilterTape& tape, const LossSpec& spec, BackwardOptions opts) {
  const FilterModel& model = tape.model();
  const Index d = model.state_dim();
  const Index m = model.meas_dim();
  const std::size_t n_steps = tape.size();

  GradientSet out;
  out.dQ_steps.resize(n_steps);
  out.dR_steps.resize(n_steps);
  out.dy.resize(n_steps);

  // Adjoints of the posterior at the current step; the posterior loss term of
  // step k is folded in at the top of iteration k.
  Vec ax_post = Vec::Zero(d);
  Mat aP_post = Mat::Zero(d, d);

  for (std::size_t k = n_steps; k-- > 0;) {
    const StepRecord& rec = tape.step(k);
    const Mat& h = model.H.at(k);
    const Mat& f = model.F.at(k);

    const StepLoss local = spec.evaluate(tape, k);
    check_local(local.grads, d, m, k);
    const LossLocalGrads& g = local.grads;
    out.loss += local.prior + local.posterior;
    ax_post += g.dl_xpost;
    aP_post += g.dl_Ppost;

    // ∂𝓛/∂x̂ₙ|ₙ₋₁ = (I−KH)ᵀ ∂𝓛/∂x̂ₙ|ₙ + ∂l/∂x̂ₙ|ₙ₋₁
    Vec ax_prior = multiply_tn(rec.IKH, ax_post) + g.dl_xprior;

    // ∂𝓛/∂Pₙ|ₙ₋₁ = (I−KH)ᵀ[∂𝓛/∂Pₙ|ₙ + ½ a zᵀR⁻¹H + ½ HᵀR⁻¹z aᵀ](I−KH) + ∂l/∂Pₙ|ₙ₋₁
    const Vec ht_rinv_z = multiply_tn(h, rec.Rinv_z);
    Mat inner = aP_post;
    inner += 0.5 * (outer(ax_post, ht_rinv_z) + outer(ht_rinv_z, ax_post));
    Mat aP_prior = multiply(multiply_tn(rec.IKH, inner), rec.IKH);
    aP_prior += g.dl_Pprior;
    aP_prior = symmetrize(aP_prior);

    // ∂𝓛/∂yₙ = Kᵀ ∂𝓛/∂x̂ₙ|ₙ + ∂l/∂yₙ
    out.dy[k] = multiply_tn(rec.K, ax_post) + g.dl_y;

    out.dQ_steps[k] = aP_prior;

    // ∂𝓛/∂Rₙ = Kᵀ ∂𝓛/∂Pₙ|ₙ K − ½ Kᵀa zᵀS⁻¹ − ½ S⁻¹z aᵀK + ∂l/∂Rₙ
    const Vec kt_a = multiply_tn(rec.K, ax_post);
    Mat dR = multiply(multiply_tn(rec.K, aP_post), rec.K);
    dR -= 0.5 * (outer(kt_a, rec.Sinv_z) + outer(rec.Sinv_z, kt_a));
    dR += g.dl_R;
    out.dR_steps[k] = symmetrize(dR);

    // Step to the previous posterior.
    ax_post = multiply_tn(f, ax_prior);
    aP_post = symmetrize(multiply(multiply_tn(f, aP_prior), f));
  }

  out.dx0 = std::move(ax_post);
  out.dP0 = std::move(aP_post);

  out.dQ_static = Mat::Zero(d, d);
  out.dR_static = Mat::Zero(m, m);
  for (std::size_t k = 0; k < n_steps; ++k) {
    out.dQ_static += out.dQ_steps[k];
    out.dR_static += out.dR_steps[k];
  }

  if (opts.factor_gradients) {
    out.dL_P0 = factor_grad_if_spd(out.dP0, model.P0);
    if (model.Q.is_static()) out.dL_Q = factor_grad_if_spd(out.dQ_static, model.Q.at(0));
    if (model.R.is_static()) out.dL_R = sqrt_factor_grad(out.dR_static, tape.noise(0).factor.lower());
  }
  return out;
}

Mat sqrt_factor_grad(const Mat& dM, const Mat& L) {
  if (dM.rows() != dM.cols() || L.rows() != L.cols() || dM.cols() != L.rows()) {
    throw DimensionError("sqrt_factor_grad: expected matching square matrices");
  }
  Mat g = 2.0 * multiply(dM, L);
  g.triangularView<Eigen::StrictlyUpper>().setZero();
  return g;
}

Mat grad_wrt(const FilterTape& tape, const LossSpec& spec, ParamTag which) {
  const bool wants_factor = which.kind == ParamTag::Kind::L_of_R ||
                            which.kind == ParamTag::Kind::L_of_Q ||
                            which.kind == ParamTag::Kind::L_of_P0;
  return grad_wrt(backward(tape, spec, BackwardOptions{wants_factor}), tape.model(), which);
}

Mat grad_wrt(const GradientSet& grads, const FilterModel& model, ParamTag which) {
  auto step_check = [&](std::size_t n) {
    if (which.step >= n) throw InvalidArgument("grad_wrt: step out of range");
  };
  auto factor = [&](const std::optional<Mat>& stored, const Mat& dM, const Mat& param) {
    if (stored) return *stored;
    return sqrt_factor_grad(dM, cholesky(param).lower());
  };
  using K = ParamTag::Kind;
  switch (which.kind) {
    case K::P0: return grads.dP0;
    case K::Q_static: return grads.dQ_static;
    case K::R_static: return grads.dR_static;
    case K::Q_step: step_check(grads.dQ_steps.size()); return grads.dQ_steps[which.step];
    case K::R_step: step_check(grads.dR_steps.size()); return grads.dR_steps[which.step];
    case K::y: step_check(grads.dy.size()); return grads.dy[which.step];
    case K::x0: return grads.dx0;
    case K::L_of_R:
      if (!model.R.is_static()) throw InvalidArgument("grad_wrt: L_of_R needs a static R");
      return factor(grads.dL_R, grads.dR_static, model.R.at(0));
    case K::L_of_Q:
      if (!model.Q.is_static()) throw InvalidArgument("grad_wrt: L_of_Q needs a static Q");
      return factor(grads.dL_Q, grads.dQ_static, model.Q.at(0));
    case K::L_of_P0:
      return factor(grads.dL_P0, grads.dP0, model.P0);
  }
  throw InvalidArgument("grad_wrt: unknown parameter tag");
}

}  // namespace kfgrad
