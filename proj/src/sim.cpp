#include "kfgrad/sim.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace kfgrad {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

constexpr std::uint64_t kDefaultRSeed = 0x4b46475244415441ULL;

Vec input_at(const SimConfig& cfg, std::size_t k) {
  const auto a = static_cast<Index>(cfg.axes);
  switch (cfg.input_profile) {
    case InputProfile::constant:
      return cfg.constant_accel;
    case InputProfile::supplied:
      return cfg.supplied[k];
    case InputProfile::sinusoidal: {
      Vec u(a);
      const double t = static_cast<double>(k) * cfg.dt;
      for (Index i = 0; i < a; ++i) {
        const double period = 240.0 * static_cast<double>(i + 1);
        u(i) = cfg.accel_amplitude * std::sin(2.0 * std::numbers::pi * t / period + 0.7 * i);
      }
      return u;
    }
  }
  return Vec::Zero(a);
}

}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t st = seed;
  for (auto& s : s_) s = splitmix64(st);
}

std::uint64_t Rng::next() noexcept {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() noexcept {
  // 53 random bits, shifted off zero.
  return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double r = std::sqrt(-2.0 * std::log(uniform()));
  const double theta = 2.0 * std::numbers::pi * uniform();
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

Vec Rng::normal_vector(Index n) {
  Vec v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal();
  return v;
}

std::string_view to_string(InputProfile p) noexcept {
  switch (p) {
    case InputProfile::constant: return "constant";
    case InputProfile::sinusoidal: return "sinusoidal";
    case InputProfile::supplied: return "supplied";
  }
  return "?";
}

Mat default_R_true(std::size_t axes) {
  Rng rng(kDefaultRSeed + axes);
  const auto a = static_cast<Index>(axes);
  Mat l = Mat::Zero(a, a);
  for (Index i = 0; i < a; ++i) {
    l(i, i) = 6.0 + 2.0 * rng.uniform();
    for (Index j = 0; j < i; ++j) l(i, j) = rng.normal();
  }
  return symmetrize(l * l.transpose());
}

SimConfig SimConfig::defaults(std::uint64_t seed, std::size_t axes) {
  SimConfig c;
  c.axes = axes;
  c.seed = seed;
  const auto a = static_cast<Index>(axes);
  const Index d = 2 * a;
  c.Q_true = Mat::Zero(d, d);
  c.Q_true.diagonal().head(a).setConstant(0.01);
  c.Q_true.diagonal().tail(a).setConstant(0.04);
  c.R_true = default_R_true(axes);
  c.x0_true = Vec::Zero(d);
  for (Index i = 0; i < a; ++i) c.x0_true(a + i) = std::pow(-0.5, static_cast<double>(i));
  c.P0 = Mat::Zero(d, d);
  c.P0.diagonal().head(a).setConstant(1.0);
  c.P0.diagonal().tail(a).setConstant(0.1);
  c.constant_accel = Vec::Zero(a);
  return c;
}

void SimConfig::validate() const {
  const Index a = static_cast<Index>(axes);
  const Index d = state_dim();
  if (axes == 0) throw InvalidArgument("sim: axes must be positive");
  if (steps == 0) throw InvalidArgument("sim: steps must be positive");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("sim: dt must be positive");
  if (Q_true.rows() != d || Q_true.cols() != d) throw DimensionError("sim: Q_true must be d x d");
  if (R_true.rows() != a || R_true.cols() != a) throw DimensionError("sim: R_true must be axes x axes");
  if (P0.rows() != d || P0.cols() != d) throw DimensionError("sim: P0 must be d x d");
  if (x0_true.size() != d) throw DimensionError("sim: x0_true must have d entries");
  require_finite(Q_true, "Q_true");
  require_finite(R_true, "R_true");
  require_finite(P0, "P0");
  require_finite(x0_true, "x0_true");
  // Q_true may be singular (noiseless dynamics); it must still be PSD.
  psd_sqrt_lower(Q_true);
  cholesky(R_true);
  if (input_profile == InputProfile::constant && constant_accel.size() != a) {
    throw DimensionError("sim: constant acceleration must have one entry per axis");
  }
  if (input_profile == InputProfile::supplied) {
    if (supplied.size() != steps) throw DimensionError("sim: supplied inputs must cover every step");
    for (const Vec& u : supplied)
      if (u.size() != a) throw DimensionError("sim: supplied input has wrong size");
  }
}

Trajectory simulate(const SimConfig& cfg) {
  cfg.validate();
  const FilterModel model = model_from_sim(cfg, cfg.R_true);
  const Index d = cfg.state_dim();
  const Index a = static_cast<Index>(cfg.axes);
  const Mat q_sqrt = psd_sqrt_lower(cfg.Q_true);
  const Mat r_sqrt = cholesky(cfg.R_true).lower();
  const Mat p0_sqrt = psd_sqrt_lower(cfg.P0);

  Rng rng(cfg.seed);
  Trajectory t;
  t.initial_state = cfg.x0_true + p0_sqrt * rng.normal_vector(d);
  t.true_states.reserve(cfg.steps);
  t.inputs.reserve(cfg.steps);
  t.measurements.reserve(cfg.steps);

  const Mat& f = model.F.at(0);
  const Mat& b = model.B.at(0);
  const Mat& h = model.H.at(0);
  Vec x = t.initial_state;
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    Vec u = input_at(cfg, k);
    x = f * x + b * u + q_sqrt * rng.normal_vector(d);
    Vec y = h * x + r_sqrt * rng.normal_vector(a);
    t.true_states.push_back(x);
    t.inputs.push_back(std::move(u));
    t.measurements.push_back(std::move(y));
  }
  return t;
}

FilterModel model_from_sim(const SimConfig& cfg, const Mat& R_guess) {
  const Index a = static_cast<Index>(cfg.axes);
  const Index d = 2 * a;
  FilterModel m;
  Mat f = Mat::Identity(d, d);
  f.topRightCorner(a, a) = cfg.dt * Mat::Identity(a, a);
  Mat b = Mat::Zero(d, a);
  b.bottomRows(a) = cfg.dt * Mat::Identity(a, a);
  Mat h = Mat::Zero(a, d);
  h.leftCols(a) = Mat::Identity(a, a);
  m.F = f;
  m.B = b;
  m.H = h;
  m.Q = cfg.Q_true;
  m.R = R_guess;
  m.P0 = cfg.P0;
  m.x0 = cfg.x0_true;
  m.u.reserve(cfg.steps);
  for (std::size_t k = 0; k < cfg.steps; ++k) m.u.push_back(input_at(cfg, k));
  return m;
}

FilterModel model_from_sim(const SimConfig& cfg, const Mat& R_guess, const Trajectory& traj) {
  FilterModel m = model_from_sim(cfg, R_guess);
  m.u = traj.inputs;
  return m;
}

}  // namespace kfgrad
