#include "kfgrad/loss.hpp"

#include <string>

namespace kfgrad {

LossLocalGrads LossLocalGrads::zeros(Index d, Index m) {
  return LossLocalGrads{Vec::Zero(d), Mat::Zero(d, d), Mat::Zero(m, m),
                        Vec::Zero(m), Vec::Zero(d), Mat::Zero(d, d)};
}

StepLoss ZeroLoss::evaluate(const FilterTape& tape, std::size_t /*k*/) const {
  const FilterModel& m = tape.model();
  return StepLoss{0.0, 0.0, LossLocalGrads::zeros(m.state_dim(), m.meas_dim())};
}

StepLoss nll_step(const FilterTape& tape, std::size_t k) {
  const StepRecord& rec = tape.step(k);
  const Mat& h = tape.model().H.at(k);
  const Vec& w = rec.Sinv_z;

  StepLoss out;
  out.prior = logdet(rec.S_factor) + dot(rec.z, w);

  LossLocalGrads g;
  g.dl_R = symmetrize(tape.innovation_precision(k) - outer(w, w));
  g.dl_Pprior = symmetrize(multiply_tn(h, multiply(g.dl_R, h)));
  g.dl_xprior = -2.0 * multiply_tn(h, w);
  g.dl_y = 2.0 * w;
  g.dl_xpost = Vec::Zero(h.cols());
  g.dl_Ppost = Mat::Zero(h.cols(), h.cols());
  out.grads = std::move(g);
  return out;
}

StepLoss NllLoss::evaluate(const FilterTape& tape, std::size_t k) const { return nll_step(tape, k); }

StepLoss mse_step(const StepRecord& rec, const Vec& truth_state, const Mat& weight) {
  const Index d = rec.x_post.size();
  if (truth_state.size() != d || weight.rows() != d || weight.cols() != d) {
    throw DimensionError("mse_step: truth/weight dimension mismatch");
  }
  const Vec e = rec.x_post - truth_state;
  const Vec we = multiply(weight, e);
  StepLoss out;
  out.posterior = dot(e, we);
  out.grads = LossLocalGrads::zeros(d, rec.z.size());
  out.grads.dl_xpost = 2.0 * we;
  return out;
}

MseLoss::MseLoss(std::vector<Vec> truth, Mat weight)
    : truth_(std::move(truth)), weight_(std::move(weight)) {
  if (weight_.rows() != weight_.cols()) throw DimensionError("MseLoss: weight must be square");
  if ((weight_ - weight_.transpose()).norm() > kSymmetryTolerance * std::max(1.0, weight_.norm())) {
    throw InvalidArgument("MseLoss: weight must be symmetric");
  }
  for (const Vec& t : truth_)
    if (t.size() != weight_.rows()) throw DimensionError("MseLoss: truth state size differs from weight");
}

StepLoss MseLoss::evaluate(const FilterTape& tape, std::size_t k) const {
  if (truth_.size() != tape.size()) {
    throw DimensionError("MseLoss: " + std::to_string(truth_.size()) + " truth states for " +
                         std::to_string(tape.size()) + " steps");
  }
  return mse_step(tape.step(k), truth_[k], weight_);
}

double total_loss(const FilterTape& tape, const LossSpec& spec) {
  double total = 0.0;
  for (std::size_t k = 0; k < tape.size(); ++k) {
    const StepLoss s = spec.evaluate(tape, k);
    total += s.prior + s.posterior;
  }
  return total;
}

}  // namespace kfgrad
