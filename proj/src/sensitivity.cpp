#include "kfgrad/sensitivity.hpp"

#include <vector>

#include "kfgrad/filter.hpp"

namespace kfgrad {

namespace {

bool applies_at(const ParamSelector& sel, std::size_t k) { return !sel.step || *sel.step == k; }

}  // namespace

double forward_sensitivity(const FilterModel& model, std::span<const Vec> ys, const LossSpec& spec,
                           const ParamSelector& sel) {
  validate(sel, model, ys.size());
  const FilterTape tape = run_filter(model, ys);
  const Index d = model.state_dim();
  const Index m = model.meas_dim();

  const bool on_p0 = sel.target == Target::P0 || sel.target == Target::LP0;
  const bool on_q = sel.target == Target::Q || sel.target == Target::LQ;
  const bool on_r = sel.target == Target::R || sel.target == Target::LR;
  const Mat seed = (on_p0 || on_q || on_r) ? tangent(model, sel) : Mat();

  SensState s;
  s.dx_post = Vec::Zero(d);
  s.dP_post = on_p0 ? seed : Mat::Zero(d, d);
  if (sel.target == Target::X0) s.dx_post(sel.row) = 1.0;

  double total = 0.0;
  for (std::size_t k = 0; k < tape.size(); ++k) {
    const StepRecord& rec = tape.step(k);
    const Mat& f = model.F.at(k);
    const Mat& h = model.H.at(k);

    // Prediction: x̂⁻ = F x̂⁺ + B u, P⁻ = F P⁺ Fᵀ + Q
    s.dx_prior = multiply(f, s.dx_post);
    s.dP_prior = multiply_nt(multiply(f, s.dP_post), f);
    if (on_q && applies_at(sel, k)) s.dP_prior += seed;
    s.dP_prior = symmetrize(s.dP_prior);

    Vec dy = Vec::Zero(m);
    if (sel.target == Target::Y && *sel.step == k) dy(sel.row) = 1.0;
    Mat dR = (on_r && applies_at(sel, k)) ? seed : Mat::Zero(m, m);

    // z = y − H x̂⁻, S = H P⁻ Hᵀ + R
    s.dz = dy - multiply(h, s.dx_prior);
    const Mat dp_ht = multiply_nt(s.dP_prior, h);
    s.dS = symmetrize(multiply(h, dp_ht) + dR);

    // K S = P⁻ Hᵀ  ⇒  dK = (dP⁻ Hᵀ − K dS) S⁻¹
    s.dK = solve_spd_right(dp_ht - multiply(rec.K, s.dS), rec.S_factor);

    // x̂⁺ = x̂⁻ + K z, P⁺ = P⁻ − K H P⁻
    s.dx_post = s.dx_prior + multiply(s.dK, rec.z) + multiply(rec.K, s.dz);
    const Mat hp = multiply(h, rec.P_prior);
    Mat dp_post = s.dP_prior - multiply(s.dK, hp) - multiply_nt(rec.K, dp_ht);
    s.dP_post = symmetrize(dp_post);

    const StepLoss local = spec.evaluate(tape, k);
    const LossLocalGrads& g = local.grads;
    total += dot(g.dl_xprior, s.dx_prior) + frobenius_inner(g.dl_Pprior, s.dP_prior) +
             frobenius_inner(g.dl_R, dR) + dot(g.dl_y, dy) + dot(g.dl_xpost, s.dx_post) +
             frobenius_inner(g.dl_Ppost, s.dP_post);
  }
  return total;
}

Mat full_gradient_forward(const FilterModel& model, std::span<const Vec> ys, const LossSpec& spec,
                          Target target, ExecPolicy policy, std::optional<std::size_t> step) {
  const auto sels = selectors_for(target, model, ys.size(), step);
  std::vector<double> values(sels.size());
  for_each_index(sels.size(), policy,
                 [&](std::size_t i) { values[i] = forward_sensitivity(model, ys, spec, sels[i]); });
  return assemble(target, sels, values, model, ys.size());
}

}  // namespace kfgrad
