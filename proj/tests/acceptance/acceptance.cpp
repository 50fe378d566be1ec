// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "kfgrad/backprop.hpp"
#include "kfgrad/bench.hpp"
#include "kfgrad/fd_oracle.hpp"
#include "kfgrad/io.hpp"
#include "kfgrad/optimizer.hpp"
#include "kfgrad/sensitivity.hpp"
#include "kfgrad/sim.hpp"
#include "support/checks.hpp"
#include "support/oracles.hpp"

using namespace kfgrad;
using namespace kfgrad::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass;
  std::string detail;
};

// Identity residuals and gradient symmetry gathered over every run below.
IdentityResiduals g_identities;
double g_asymmetry = 0.0;
std::size_t g_tapes = 0;

void record_tape(const Instance& inst, const LossSpec& loss) {
  const FilterTape tape = run_filter(inst.model, inst.ys);
  const IdentityResiduals r = tape_identities(tape);
  g_identities.woodbury = std::max(g_identities.woodbury, r.woodbury);
  g_identities.information = std::max(g_identities.information, r.information);
  g_identities.gain = std::max(g_identities.gain, r.gain);
  const GradientSet g = backward(tape, loss, {true});
  g_asymmetry = std::max(g_asymmetry, gradient_asymmetry(g));
  ++g_tapes;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Outcome criterion_fd() {
  const auto t0 = Clock::now();
  const Index ds[] = {1, 2, 3, 6};
  const Index ms[] = {1, 2, 3};
  const std::size_t ns[] = {5, 50};
  std::size_t fields = 0, failures = 0;
  double worst = 0.0;
  std::string worst_where;
  for (int i = 0; i < 40; ++i) {
    InstanceShape s;
    s.d = ds[i % 4];
    s.m = ms[(i / 4) % 3];
    s.steps = ns[(i / 12) % 2 == 0 ? (i % 2) : 1 - (i % 2)];
    s.p = i % 3 == 0 ? 1 : 0;
    s.per_step_noise = i % 5 == 0;
    s.per_step_dynamics = i % 7 == 0;
    const auto seed = static_cast<std::uint64_t>(1000 + i);
    const Instance inst = random_instance(seed, s);
    Rng rng(seed);
    const MseLoss mse(inst.truth, random_spd(rng, s.d, 0.5, 2.0));
    const NllLoss nll;
    const LossSpec& loss = i % 2 == 0 ? static_cast<const LossSpec&>(nll) : mse;
    record_tape(inst, loss);
    for (const FieldCheck& c : audit_gradients(inst, loss, Reference::finite_difference, FdConfig::extrapolated())) {
      ++fields;
      const double excess = c.d.max_abs / (1e-5 * c.d.scale + 1e-8);
      if (excess > worst) {
        worst = excess;
        worst_where = "instance " + std::to_string(i) + " " + c.field;
      }
      if (!c.d.within(1e-5, 1e-8)) ++failures;
    }
  }
  const double secs = seconds_since(t0);
  return {failures == 0 && secs < 60.0,
          std::to_string(fields) + " gradient fields on 40 instances, " + std::to_string(failures) +
              " outside tolerance, worst at " + fmt("%.3f", worst) + " of the allowance (" + worst_where + "), " +
              fmt("%.1f s", secs)};
}

Outcome criterion_forward() {
  const auto t0 = Clock::now();
  std::size_t fields = 0, failures = 0;
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    InstanceShape s;
    s.d = 1 + i % 4;
    s.m = 1 + (i / 2) % std::min<Index>(3, s.d);
    s.steps = i % 2 ? 50 : 10 + 4 * static_cast<std::size_t>(i);
    s.p = i % 3 == 1 ? 2 : 0;
    s.per_step_noise = i % 4 == 3;
    const Instance inst = random_instance(static_cast<std::uint64_t>(2000 + i), s);
    const NllLoss nll;
    record_tape(inst, nll);
    for (const FieldCheck& c : audit_gradients(inst, nll, Reference::sensitivity)) {
      ++fields;
      worst = std::max(worst, c.d.relative);
      if (!c.d.within(1e-8, 0.0)) ++failures;
    }
  }
  const double secs = seconds_since(t0);
  return {failures == 0 && secs < 60.0,
          std::to_string(fields) + " fields on 10 instances, max relative difference " + fmt("%.2e", worst) +
              ", " + fmt("%.1f s", secs)};
}

Outcome criterion_hand() {
  const io::ModelFile mf = io::load_model(std::string(KFGRAD_FIXTURE_DIR) + "/onestep.model.json");
  const io::DataSet data = io::read_data_csv(*mf.data_path, 1, 0, 1);
  const GradientSet g = backward(run_filter(mf.model, data.ys), NllLoss{});
  const bool ok = within_ulps(g.dR_static(0, 0), -0.5, 4) && within_ulps(g.dP0(0, 0), -0.5, 4) &&
                  within_ulps(g.dy[0](0), 2.0, 4) && within_ulps(g.dx0(0), -2.0, 4);
  char buf[160];
  std::snprintf(buf, sizeof buf, "dR=%.17g dP0=%.17g dy=%.17g dx0=%.17g (4 ulp bound)", g.dR_static(0, 0),
                g.dP0(0, 0), g.dy[0](0), g.dx0(0));
  return {ok, buf};
}

Outcome criterion_identities() {
  const bool ok = g_identities.woodbury <= 1e-9 && g_identities.information <= 1e-8 &&
                  g_identities.gain <= 1e-9 && g_asymmetry == 0.0;
  char buf[200];
  std::snprintf(buf, sizeof buf, "%zu tapes: Woodbury %.1e, information form %.1e, gain %.1e, asymmetry %.1e",
                g_tapes, g_identities.woodbury, g_identities.information, g_identities.gain, g_asymmetry);
  return {ok, buf};
}

// Plain gradient descent on L_R using central differences of the loss.
Mat fd_descent(const FilterModel& model, const std::vector<Vec>& ys, Mat l, double alpha, std::size_t iters) {
  const NllLoss nll;
  for (std::size_t it = 0; it < iters; ++it) {
    FilterModel cur = apply_factors(model, {{Target::R, l}});
    const Mat g = fd_full(cur, ys, nll, Target::LR);
    for (Index i = 0; i < l.rows(); ++i)
      for (Index j = 0; j <= i; ++j) {
        double step = alpha * g(i, j);
        if (i == j)
          for (int h = 0; h < 20 && l(i, i) - step <= 0.0; ++h) step *= 0.5;
        l(i, j) -= step;
      }
  }
  return l;
}

Outcome criterion_fit() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    const SimConfig sc = SimConfig::defaults(seed, 3);
    const Trajectory traj = simulate(sc);
    const FilterModel model = model_from_sim(sc, sc.R_true, traj);
    FitConfig cfg;
    cfg.alpha = 0.005;
    cfg.max_iters = 100;
    const FitReport r = fit(model, traj.measurements, NllLoss{}, cfg);
    // Increases smaller than round-off in the summed loss are not counted.
    bool monotone = true;
    for (std::size_t k = 3; k + 1 < r.loss_history.size(); ++k)
      if (r.loss_history[k + 1] > r.loss_history[k] + 1e-12 * std::abs(r.loss_history[k])) monotone = false;
    const Mat& rf = r.covariances.at(Target::R);
    const double err = (rf - sc.R_true).norm() / sc.R_true.norm();
    std::string oracle;
    if (seed == 1) {
      const Mat l_fd = fd_descent(model, traj.measurements, r.initial_factors.at(Target::R), cfg.alpha, cfg.max_iters);
      const Mat r_fd = l_fd * l_fd.transpose();
      const double fd_err = (r_fd - sc.R_true).norm() / sc.R_true.norm();
      const double agree = (r_fd - rf).norm() / rf.norm();
      oracle = fmt(", FD-descent oracle error %.3f", fd_err) + fmt(" (differs from backward run by %.1e)", agree);
      ok = ok && agree < 1e-4;
    }
    ok = ok && monotone && err <= 0.15;
    detail += "seed " + std::to_string(seed) + ": R error " + fmt("%.3f", err) +
              (monotone ? ", non-increasing after iteration 3" : ", loss increased after iteration 3") + oracle + "; ";
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 300.0;
  return {ok, detail + fmt("%.1f s", secs)};
}

Outcome criterion_performance() {
  std::vector<double> ratios;
  std::string detail;
  for (std::size_t axes : {1, 2, 3, 4}) {
    const BenchMethod methods[] = {BenchMethod::backward, BenchMethod::sensitivity};
    const std::vector<BenchRow> rows = bench_dimension(methods, axes, 1440, 9, 1);
    const BenchRow& b = rows[0];
    const BenchRow& s = rows[1];
    ratios.push_back(s.median_ms / b.median_ms);
    detail += "d=" + std::to_string(2 * axes) + fmt(" %.2fx", ratios.back()) +
              fmt(" (%.2f ms", b.median_ms) + fmt(" vs %.2f ms); ", s.median_ms);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < ratios.size(); ++i) monotone = monotone && ratios[i] > ratios[i - 1];
  const bool ok = ratios[2] >= 10.0 && monotone;
  detail += std::string("needs >= 10x at d=6: ") + (ratios[2] >= 10.0 ? "met" : "not met") +
            "; monotone in d: " + (monotone ? "yes" : "no");
  return {ok, detail};
}

Outcome criterion_op_count() {
  bool ok = true;
  std::string detail;
  for (std::size_t axes : {1, 3}) {
    std::vector<double> per_step;
    for (std::size_t n : {100, 1000}) {
      SimConfig sc = SimConfig::defaults(1, axes);
      sc.steps = n;
      const Trajectory traj = simulate(sc);
      const FilterTape tape = run_filter(model_from_sim(sc, sc.R_true, traj), traj.measurements);
      reset_op_counts();
      backward(tape, NllLoss{});
      const OpCounts c = op_counts();
      ok = ok && c.factorizations == 0 && c.solves == 0;
      const double d = static_cast<double>(2 * axes);
      per_step.push_back(static_cast<double>(c.multiplies) / static_cast<double>(n));
      detail += "d=" + std::to_string(2 * axes) + " N=" + std::to_string(n) + ": " + std::to_string(c.multiplies) +
                " multiplies, C=" + fmt("%.2f", static_cast<double>(c.multiplies) / (static_cast<double>(n) * d * d * d)) +
                ", " + std::to_string(c.factorizations) + " factorizations; ";
    }
    ok = ok && per_step[0] == per_step[1];
  }
  return {ok, detail + "per-step count identical across N: " + (ok ? "yes" : "no")};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "gradients match finite differences", criterion_fd},
      {2, "forward sensitivity equals backward", criterion_forward},
      {3, "hand-computed one-step fixture", criterion_hand},
      {4, "tape identities and exact symmetry", criterion_identities},
      {5, "maximum-likelihood fit of R on the constant-velocity problem", criterion_fit},
      {6, "backward vs forward sensitivity timing", criterion_performance},
      {7, "backward multiply count", criterion_op_count},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] criterion %d: %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
