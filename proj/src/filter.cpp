#include "kfgrad/filter.hpp"

#include <string>

namespace kfgrad {

NoiseFactor factor_noise(const Mat& r) {
  SpdFactor f = cholesky(r);
  Mat inv = inverse(f);
  return NoiseFactor{std::move(f), std::move(inv)};
}

FilterTape::FilterTape(std::shared_ptr<const FilterModel> model, std::vector<StepRecord> steps,
                       std::vector<NoiseFactor> noise)
    : model_(std::move(model)), steps_(std::move(steps)), noise_(std::move(noise)) {}

Mat FilterTape::innovation_precision(std::size_t k) const {
  const StepRecord& rec = steps_.at(k);
  const Mat& h = model_->H.at(k);
  Mat i_hk = -multiply(h, rec.K);
  i_hk.diagonal().array() += 1.0;
  return symmetrize(multiply(noise(k).inverse, i_hk));
}

Prediction predict(const Vec& x_post_prev, const Mat& P_post_prev, const FilterModel& model,
                   std::size_t k) {
  const Mat& f = model.F.at(k);
  if (x_post_prev.size() != f.cols() || P_post_prev.rows() != f.cols() ||
      P_post_prev.cols() != f.cols()) {
    throw DimensionError("predict: state dimension mismatch at step " + std::to_string(k + 1));
  }
  Vec x = multiply(f, x_post_prev);
  if (model.has_inputs()) x += multiply(model.B.at(k), model.u.at(k));
  Mat p = multiply_nt(multiply(f, P_post_prev), f);
  p += model.Q.at(k);
  return Prediction{std::move(x), symmetrize(p)};
}

StepRecord update(const Vec& x_prior, const Mat& P_prior, const Vec& y, const FilterModel& model,
                  std::size_t k, const NoiseFactor& noise) {
  const Mat& h = model.H.at(k);
  const Mat& r = model.R.at(k);
  if (y.size() != h.rows() || x_prior.size() != h.cols()) {
    throw DimensionError("update: measurement dimension mismatch at step " +
                         std::to_string(k + 1));
  }
  const Mat hp = multiply(h, P_prior);
  Mat s = multiply_nt(hp, h);
  s += r;
  auto s_factor = [&] {
    try {
      return cholesky(symmetrize(s));
    } catch (const NotPositiveDefinite& e) {
      throw e.at_step(k + 1, "innovation covariance S");
    }
  }();

  Vec z = y - multiply(h, x_prior);
  // K = P Hᵀ S⁻¹ = (S⁻¹ H P)ᵀ
  Mat gain = solve_spd(s_factor, hp).transpose();
  Vec sinv_z = solve_spd(s_factor, z);
  Vec rinv_z = solve_spd(noise.factor, z);
  Vec x_post = x_prior + multiply(gain, z);
  Mat ikh = -multiply(gain, h);
  ikh.diagonal().array() += 1.0;
  Mat p_post = symmetrize(multiply(ikh, P_prior));

  return StepRecord{x_prior,        std::move(x_post), P_prior,           std::move(p_post),
                    std::move(gain), std::move(z),      std::move(s_factor), std::move(sinv_z),
                    std::move(rinv_z), std::move(ikh),  y};
}

StepRecord update(const Vec& x_prior, const Mat& P_prior, const Vec& y, const FilterModel& model,
                  std::size_t k) {
  try {
    return update(x_prior, P_prior, y, model, k, factor_noise(model.R.at(k)));
  } catch (const NotPositiveDefinite& e) {
    if (e.step()) throw;
    throw e.at_step(k + 1, "measurement covariance R");
  }
}

FilterTape run_filter(FilterModel model, std::span<const Vec> ys) {
  return run_filter(std::make_shared<const FilterModel>(std::move(model)), ys);
}

FilterTape run_filter(std::shared_ptr<const FilterModel> model, std::span<const Vec> ys) {
  if (ys.empty()) throw InvalidArgument("run_filter: measurement sequence is empty");
  model->validate(ys.size());

  std::vector<NoiseFactor> noise;
  const std::size_t n_noise = model->R.is_static() ? 1 : ys.size();
  noise.reserve(n_noise);
  for (std::size_t k = 0; k < n_noise; ++k) {
    try {
      noise.push_back(factor_noise(model->R.at(k)));
    } catch (const NotPositiveDefinite& e) {
      throw e.at_step(k + 1, "measurement covariance R");
    }
  }

  std::vector<StepRecord> steps;
  steps.reserve(ys.size());
  Vec x = model->x0;
  Mat p = model->P0;
  for (std::size_t k = 0; k < ys.size(); ++k) {
    Prediction pred = predict(x, p, *model, k);
    steps.push_back(update(pred.x, pred.P, ys[k], *model, k, noise[n_noise == 1 ? 0 : k]));
    x = steps.back().x_post;
    p = steps.back().P_post;
  }
  return FilterTape(std::move(model), std::move(steps), std::move(noise));
}

}  // namespace kfgrad
