#include <doctest.h>

#include <cmath>

#include "kfgrad/error.hpp"
#include "kfgrad/filter.hpp"
#include "kfgrad/sim.hpp"
#include "support/oracles.hpp"
#include "support/random_instance.hpp"

using namespace kfgrad;
using namespace kfgrad::testing;

namespace {

Mat scalar(double v) { return Mat::Constant(1, 1, v); }

FilterModel scalar_model(double f, double h, double q, double r) {
  FilterModel m;
  m.F = scalar(f);
  m.H = scalar(h);
  m.Q = scalar(q);
  m.R = scalar(r);
  m.P0 = scalar(1.0);
  m.x0 = Vec::Zero(1);
  return m;
}

}  // namespace

TEST_CASE("predict") {
  Rng rng(1);
  SUBCASE("identity dynamics leave the state alone") {
    FilterModel m;
    m.F = Mat(Mat::Identity(3, 3));
    m.Q = Mat(Mat::Zero(3, 3));
    const Vec x = rng.normal_vector(3);
    const Mat p = random_spd(rng, 3, 0.5, 2.0);
    const Prediction pr = predict(x, p, m, 0);
    CHECK(pr.x == x);
    CHECK((pr.P - p).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("scalar") {
    const FilterModel m = scalar_model(2.0, 1.0, 3.0, 1.0);
    const Prediction pr = predict(Vec::Constant(1, 1.0), scalar(1.0), m, 0);
    CHECK(pr.x(0) == 2.0);
    CHECK(pr.P(0, 0) == 7.0);
  }
  SUBCASE("constant-velocity model with unit time step") {
    SimConfig cfg = SimConfig::defaults(1, 3);
    const FilterModel m = model_from_sim(cfg, cfg.R_true);
    Vec x(6);
    x << 1, 2, 3, 0.5, -1, 2;
    const Vec u = m.u[0];
    const Prediction pr = predict(x, Mat(Mat::Identity(6, 6)), m, 0);
    CHECK((pr.x.head(3) - (x.head(3) + x.tail(3))).norm() < 1e-15);
    CHECK((pr.x.tail(3) - (x.tail(3) + u)).norm() < 1e-15);
  }
}

TEST_CASE("update") {
  SUBCASE("no-information limit") {
    Rng rng(4);
    FilterModel m;
    m.H = Mat(Mat::Identity(2, 2));
    m.R = Mat(1e6 * Mat::Identity(2, 2));
    const Vec x = rng.normal_vector(2);
    const StepRecord r = update(x, Mat::Identity(2, 2), rng.normal_vector(2), m, 0);
    CHECK(r.K.cwiseAbs().maxCoeff() < 1e-5);
    CHECK((r.x_post - x).norm() < 1e-4);
  }
  SUBCASE("scalar") {
    const FilterModel m = scalar_model(1.0, 1.0, 0.0, 1.0);
    const StepRecord r = update(Vec::Zero(1), scalar(1.0), Vec::Constant(1, 2.0), m, 0);
    CHECK(within_ulps(r.S_factor.reconstruct()(0, 0), 2.0));
    CHECK(within_ulps(r.K(0, 0), 0.5));
    CHECK(r.z(0) == 2.0);
    CHECK(within_ulps(r.x_post(0), 1.0));
    CHECK(within_ulps(r.P_post(0, 0), 0.5));
  }
  SUBCASE("gain matches an explicit-inverse oracle") {
    Rng rng(21);
    FilterModel m;
    m.H = random_matrix(rng, 3, 6);
    m.R = random_spd(rng, 3, 0.5, 2.0);
    const Mat p = random_spd(rng, 6, 0.5, 3.0);
    const StepRecord r = update(rng.normal_vector(6), p, rng.normal_vector(3), m, 0);
    const Mat h = m.H.at(0);
    const Mat s = naive_multiply(naive_multiply(h, p), h.transpose()) + m.R.at(0);
    const Mat k = naive_multiply(naive_multiply(p, h.transpose()), gauss_jordan_inverse(s));
    CHECK((r.K - k).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(r.P_post == r.P_post.transpose());
  }
}

TEST_CASE("run_filter") {
  SUBCASE("one step is one predict and one update") {
    const Instance inst = random_instance(7, {3, 2, 1, 1, false, false});
    const FilterTape tape = run_filter(inst.model, inst.ys);
    const Prediction pr = predict(inst.model.x0, inst.model.P0, inst.model, 0);
    const StepRecord r = update(pr.x, pr.P, inst.ys[0], inst.model, 0);
    CHECK(tape.size() == 1);
    CHECK((tape.step(0).x_post - r.x_post).norm() == 0.0);
    CHECK((tape.step(0).P_post - r.P_post).norm() == 0.0);
  }
  SUBCASE("posterior means match a textbook filter") {
    for (std::uint64_t seed = 30; seed < 36; ++seed) {
      const Instance inst = random_instance(seed, random_shape(seed));
      const FilterTape tape = run_filter(inst.model, inst.ys);
      const auto ref = textbook_posterior_means(inst.model, inst.ys);
      for (std::size_t k = 0; k < tape.size(); ++k)
        CHECK((tape.step(k).x_post - ref[k]).norm() < 1e-9 * std::max(1.0, ref[k].norm()));
    }
  }
  SUBCASE("innovation precision equals the inverse of S") {
    const Instance inst = random_instance(40, {4, 3, 0, 10, true, true});
    const FilterTape tape = run_filter(inst.model, inst.ys);
    for (std::size_t k = 0; k < tape.size(); ++k) {
      const Mat s_inv = gauss_jordan_inverse(tape.step(k).S_factor.reconstruct());
      CHECK((tape.innovation_precision(k) - s_inv).cwiseAbs().maxCoeff() < 1e-9 * s_inv.norm());
    }
  }
  SUBCASE("singular R is rejected with the failing step") {
    FilterModel m = scalar_model(1.0, 1.0, 0.1, 1.0);
    m.R = StepSeries<Mat>::per_step({scalar(1.0), scalar(0.0)});
    const std::vector<Vec> ys{Vec::Zero(1), Vec::Zero(1)};
    try {
      run_filter(m, ys);
      FAIL("expected NotPositiveDefinite");
    } catch (const NotPositiveDefinite& e) {
      REQUIRE(e.step().has_value());
      CHECK(*e.step() == 2);
    }
    m.R = scalar(0.0);
    CHECK_THROWS_AS(run_filter(m, ys), NotPositiveDefinite);
  }
  SUBCASE("bad input") {
    const FilterModel m = scalar_model(1.0, 1.0, 0.1, 1.0);
    CHECK_THROWS_AS(run_filter(m, std::vector<Vec>{}), InvalidArgument);
    CHECK_THROWS_AS(run_filter(m, std::vector<Vec>{Vec::Zero(2)}), DimensionError);
  }
}

TEST_CASE("innovations are white at the true parameters") {
  SimConfig cfg = SimConfig::defaults(5, 3);
  const Trajectory traj = simulate(cfg);
  const FilterModel m = model_from_sim(cfg, cfg.R_true, traj);
  const FilterTape tape = run_filter(m, traj.measurements);
  const auto n = static_cast<double>(tape.size());
  const double dof = n * 3.0;

  double chi2 = 0.0;
  Vec mean = Vec::Zero(3);
  std::vector<Vec> white;
  for (const StepRecord& r : tape.steps()) {
    chi2 += r.z.dot(r.Sinv_z);
    // L⁻¹ z has identity covariance.
    white.push_back(r.S_factor.lower().triangularView<Eigen::Lower>().solve(r.z));
    mean += white.back();
  }
  mean /= n;
  CHECK(std::abs(chi2 - dof) < 4.0 * std::sqrt(2.0 * dof));
  CHECK(mean.cwiseAbs().maxCoeff() < 4.0 / std::sqrt(n));
  for (Index c = 0; c < 3; ++c) {
    double lag1 = 0.0;
    for (std::size_t k = 1; k < white.size(); ++k) lag1 += white[k](c) * white[k - 1](c);
    CHECK(std::abs(lag1 / n) < 4.0 / std::sqrt(n));
  }
}
