#include <doctest.h>

#include <cmath>

#include "kfgrad/backprop.hpp"
#include "kfgrad/error.hpp"
#include "support/checks.hpp"
#include "support/oracles.hpp"
#include "support/random_instance.hpp"

using namespace kfgrad;
using namespace kfgrad::testing;

namespace {

void require_all_within(const std::vector<FieldCheck>& checks, double rtol, double atol) {
  for (const FieldCheck& c : checks) {
    CAPTURE(c.field);
    CAPTURE(c.d.relative);
    CHECK(c.d.within(rtol, atol));
  }
}

}  // namespace

TEST_CASE("zero loss gives zero gradients") {
  const Instance inst = random_instance(3, {3, 2, 1, 6, false, false});
  const GradientSet g = backward(run_filter(inst.model, inst.ys), ZeroLoss{}, {true});
  CHECK(g.loss == 0.0);
  CHECK(g.dP0.isZero(0.0));
  CHECK(g.dx0.isZero(0.0));
  CHECK(g.dQ_static.isZero(0.0));
  CHECK(g.dR_static.isZero(0.0));
  for (const Vec& v : g.dy) CHECK(v.isZero(0.0));
  REQUIRE(g.dL_R.has_value());
  CHECK(g.dL_R->isZero(0.0));
}

TEST_CASE("scalar one-step gradients match the hand computation") {
  const Instance inst = scalar_one_step();
  const GradientSet g = backward(run_filter(inst.model, inst.ys), NllLoss{});
  CHECK(within_ulps(g.loss, std::log(2.0) + 2.0));
  CHECK(within_ulps(g.dR_static(0, 0), -0.5));
  CHECK(within_ulps(g.dR_steps[0](0, 0), -0.5));
  CHECK(within_ulps(g.dP0(0, 0), -0.5));
  CHECK(within_ulps(g.dQ_static(0, 0), -0.5));
  CHECK(within_ulps(g.dy[0](0), 2.0));
  CHECK(within_ulps(g.dx0(0), -2.0));
}

TEST_CASE("every gradient field matches finite differences: random 6D, N = 50") {
  const Instance inst = random_instance(101, {6, 3, 2, 50, false, false});
  require_all_within(audit_gradients(inst, NllLoss{}, Reference::finite_difference), 1e-5, 1e-8);
}

TEST_CASE("every gradient field matches finite differences: time-varying models") {
  for (std::uint64_t seed = 200; seed < 204; ++seed) {
    CAPTURE(seed);
    const Instance inst = random_instance(seed, {3, 2, 1, 6, true, true});
    require_all_within(audit_gradients(inst, NllLoss{}, Reference::finite_difference), 1e-5, 1e-8);
  }
}

TEST_CASE("mse loss gradients match finite differences") {
  for (std::uint64_t seed = 300; seed < 303; ++seed) {
    CAPTURE(seed);
    const Instance inst = random_instance(seed, random_shape(seed));
    Rng rng(seed);
    const MseLoss mse(inst.truth, random_spd(rng, inst.model.state_dim(), 0.5, 2.0));
    require_all_within(audit_gradients(inst, mse, Reference::finite_difference), 1e-5, 1e-8);
  }
}

TEST_CASE("gradients are exactly symmetric") {
  const Instance inst = random_instance(5, {5, 3, 0, 20, true, false});
  const GradientSet g = backward(run_filter(inst.model, inst.ys), NllLoss{});
  CHECK(gradient_asymmetry(g) == 0.0);
}

TEST_CASE("backward performs no factorizations") {
  const Instance inst = random_instance(6, {4, 2, 0, 30, false, false});
  const FilterTape tape = run_filter(inst.model, inst.ys);
  reset_op_counts();
  backward(tape, NllLoss{});
  CHECK(op_counts().factorizations == 0);
  CHECK(op_counts().solves == 0);
}

TEST_CASE("sqrt_factor_grad") {
  CHECK(sqrt_factor_grad(Mat::Zero(3, 3), Mat::Identity(3, 3)).isZero(0.0));
  CHECK(sqrt_factor_grad(Mat::Identity(3, 3), Mat::Identity(3, 3)) == 2.0 * Mat::Identity(3, 3));
  Rng rng(1);
  const Mat l = cholesky(random_spd(rng, 4, 0.5, 2.0)).lower();
  CHECK(is_lower_triangular(sqrt_factor_grad(random_spd(rng, 4, 0.1, 1.0), l)));
  CHECK_THROWS_AS(sqrt_factor_grad(Mat::Identity(3, 3), Mat::Identity(2, 2)), DimensionError);
}

TEST_CASE("grad_wrt") {
  const Instance inst = random_instance(8, {3, 2, 0, 7, false, false});
  const FilterTape tape = run_filter(inst.model, inst.ys);
  const GradientSet g = backward(tape, NllLoss{}, {true});

  CHECK(grad_wrt(tape, ZeroLoss{}, {ParamTag::Kind::Q_static}).isZero(0.0));
  Mat sum = Mat::Zero(2, 2);
  for (std::size_t k = 0; k < 7; ++k) sum += grad_wrt(tape, NllLoss{}, {ParamTag::Kind::R_step, k});
  CHECK(sum == g.dR_static);
  const Mat l = cholesky(inst.model.R.at(0)).lower();
  CHECK(grad_wrt(g, inst.model, {ParamTag::Kind::L_of_R}) == sqrt_factor_grad(g.dR_static, l));
  CHECK(grad_wrt(g, inst.model, {ParamTag::Kind::y, 2}) == Mat(g.dy[2]));
  CHECK(grad_wrt(g, inst.model, {ParamTag::Kind::x0}) == Mat(g.dx0));
  CHECK_THROWS_AS(grad_wrt(g, inst.model, {ParamTag::Kind::y, 7}), InvalidArgument);
}

TEST_CASE("loss with mismatched local gradients is rejected") {
  struct BadLoss final : LossSpec {
    StepLoss evaluate(const FilterTape& tape, std::size_t k) const override {
      StepLoss l = nll_step(tape, k);
      l.grads.dl_R = Mat::Zero(5, 5);
      return l;
    }
    std::string_view name() const override { return "bad"; }
  };
  const Instance inst = random_instance(4, {2, 1, 0, 3, false, false});
  CHECK_THROWS_AS(backward(run_filter(inst.model, inst.ys), BadLoss{}), DimensionError);
}
