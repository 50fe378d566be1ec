#include "kfgrad/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "kfgrad/backprop.hpp"
#include "kfgrad/filter.hpp"
#include "kfgrad/sensitivity.hpp"

namespace kfgrad {

namespace {

constexpr int kMaxHalvings = 20;

Target matrix_target(Target factor_or_matrix) {
  switch (factor_or_matrix) {
    case Target::R:
    case Target::Q:
    case Target::P0:
      return factor_or_matrix;
    default:
      throw InvalidArgument("fit: targets must be R, Q or P0");
  }
}

const Mat& current_matrix(const FilterModel& model, Target t) {
  switch (t) {
    case Target::R:
      if (!model.R.is_static()) throw InvalidArgument("fit: R must be static");
      return model.R.at(0);
    case Target::Q:
      if (!model.Q.is_static()) throw InvalidArgument("fit: Q must be static");
      return model.Q.at(0);
    default:
      return model.P0;
  }
}

Mat matrix_gradient(const FilterModel& model, std::span<const Vec> ys, const LossSpec& spec,
                    GradientMethod method, Target t, const GradientSet* grads) {
  if (method == GradientMethod::backward) {
    switch (t) {
      case Target::R: return grads->dR_static;
      case Target::Q: return grads->dQ_static;
      default: return grads->dP0;
    }
  }
  return full_gradient_forward(model, ys, spec, t);
}

}  // namespace

void FitConfig::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidArgument("fit: alpha must be >= 0");
  if (targets.empty()) throw InvalidArgument("fit: no targets");
  if (!(stop_tol >= 0.0)) throw InvalidArgument("fit: stop_tol must be >= 0");
  for (Target t : targets) matrix_target(t);
  for (const auto& [t, l] : init_factors) {
    if (!is_lower_triangular(l)) throw InvalidArgument("fit: initial factor must be lower-triangular");
    if ((l.diagonal().array() <= 0.0).any()) {
      throw InvalidArgument("fit: initial factor must have a positive diagonal");
    }
  }
}

Mat default_initial_factor(const Mat& current, double scale) {
  const Index n = current.rows();
  const double level = scale * current.trace() / static_cast<double>(n);
  return cholesky(level * Mat::Identity(n, n)).lower();
}

FilterModel apply_factors(FilterModel model, const std::map<Target, Mat>& factors) {
  for (const auto& [t, l] : factors) {
    Mat m = symmetrize(multiply_nt(l, l));
    switch (t) {
      case Target::R: model.R = StepSeries<Mat>(std::move(m)); break;
      case Target::Q: model.Q = StepSeries<Mat>(std::move(m)); break;
      default: model.P0 = std::move(m);
    }
  }
  return model;
}

FitReport fit(const FilterModel& model, std::span<const Vec> ys, const LossSpec& spec,
              const FitConfig& cfg) {
  cfg.validate();
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();

  FitReport report;
  report.alpha = cfg.alpha;
  std::map<Target, Mat> factors;
  for (Target t : cfg.targets) {
    auto it = cfg.init_factors.find(t);
    Mat l = it != cfg.init_factors.end() ? it->second : default_initial_factor(current_matrix(model, t));
    if (l.rows() != current_matrix(model, t).rows()) {
      throw DimensionError("fit: initial factor for " + std::string(to_string(t)) + " has wrong size");
    }
    factors[t] = std::move(l);
  }
  report.initial_factors = factors;

  for (std::size_t iter = 0;; ++iter) {
    const FilterModel current = apply_factors(model, factors);
    GradientSet grads;
    try {
      grads = backward(run_filter(current, ys), spec);
    } catch (const NotPositiveDefinite& e) {
      throw NumericalError("fit: filter failed at iteration " + std::to_string(iter) + ": " + e.what());
    }
    if (!std::isfinite(grads.loss)) {
      throw NumericalError("fit: loss is not finite at iteration " + std::to_string(iter));
    }

    std::map<Target, Mat> factor_grads;
    double sq = 0.0;
    for (const auto& [t, l] : factors) {
      const Mat dM = matrix_gradient(current, ys, spec, cfg.method, t, &grads);
      Mat g = sqrt_factor_grad(dM, l);
      sq += g.squaredNorm();
      factor_grads[t] = std::move(g);
    }
    report.loss_history.push_back(grads.loss);
    report.grad_norm_history.push_back(std::sqrt(sq));
    report.wall_ms.push_back(std::chrono::duration<double, std::milli>(clock::now() - t0).count());

    if (iter > 0 && cfg.stop_tol > 0.0) {
      const double prev = report.loss_history[iter - 1];
      if (std::abs(grads.loss - prev) <= cfg.stop_tol * std::abs(prev)) {
        report.converged = true;
        break;
      }
    }
    if (iter == cfg.max_iters) break;

    for (auto& [t, l] : factors) {
      const Mat& g = factor_grads[t];
      for (Index i = 0; i < l.rows(); ++i) {
        for (Index j = 0; j <= i; ++j) {
          double step = cfg.alpha * g(i, j);
          if (i == j) {
            int halvings = 0;
            while (l(i, i) - step <= 0.0) {
              if (halvings == kMaxHalvings) {
                throw NumericalError("fit: diagonal of L_" + std::string(to_string(t)) +
                                     " would become non-positive at iteration " +
                                     std::to_string(iter));
              }
              step *= 0.5;
              ++halvings;
              ++report.backtracks;
            }
          }
          l(i, j) -= step;
        }
      }
      if (!l.allFinite()) {
        throw NumericalError("fit: factor diverged at iteration " + std::to_string(iter));
      }
    }
    ++report.iterations;
  }

  report.factors = factors;
  for (const auto& [t, l] : factors) report.covariances[t] = symmetrize(multiply_nt(l, l));
  report.wall_time_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  return report;
}

}  // namespace kfgrad
