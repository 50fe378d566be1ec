#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "kfgrad/model.hpp"

namespace kfgrad {

// xoshiro256** seeded through splitmix64, with Box-Muller normals. The whole
// stream is defined by the seed, so simulated data is identical across runs
// and platforms.
class Rng {
 public:
  static constexpr std::string_view kName =
      "xoshiro256** (splitmix64 seeding), Box-Muller standard normals";

  explicit Rng(std::uint64_t seed);

  std::uint64_t next() noexcept;
  double uniform() noexcept;  // in (0, 1)
  double normal() noexcept;
  Vec normal_vector(Index n);

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

enum class InputProfile { constant, sinusoidal, supplied };

std::string_view to_string(InputProfile p) noexcept;

// Constant-velocity point moving in `axes` dimensions: state (p, v) of size
// 2·axes, acceleration inputs, position measurements.
struct SimConfig {
  std::size_t axes = 3;
  std::size_t steps = 1440;
  double dt = 1.0;
  Mat Q_true;
  Mat R_true;
  Vec x0_true;
  Mat P0;
  InputProfile input_profile = InputProfile::sinusoidal;
  double accel_amplitude = 0.05;
  Vec constant_accel;            // for InputProfile::constant
  std::vector<Vec> supplied;     // for InputProfile::supplied, one per step
  std::uint64_t seed = 1;

  // Documented defaults: Q = diag(0.01 on positions, 0.04 on velocities),
  // correlated R_true from default_R_true, P0 = diag(1, 0.1), sinusoidal input.
  static SimConfig defaults(std::uint64_t seed, std::size_t axes = 3);

  Index state_dim() const noexcept { return static_cast<Index>(2 * axes); }
  void validate() const;
};

// Correlated SPD measurement covariance L·Lᵀ drawn from a fixed seed,
// independent of the simulation seed. Eigenvalues stay well above 15.
Mat default_R_true(std::size_t axes);

// All vectors have `steps` entries; index k belongs to step n = k + 1.
// inputs[k] is the acceleration applied when predicting into step k + 1, so
// the model's uₙ equals the physical aₙ₋₁.
struct Trajectory {
  Vec initial_state;
  std::vector<Vec> true_states;
  std::vector<Vec> inputs;
  std::vector<Vec> measurements;
};

Trajectory simulate(const SimConfig& cfg);

// F = [[I, Δt·I], [0, I]], B = [[0], [Δt·I]], H = [I, 0], Q = Q_true,
// R = R_guess, (x0, P0) from the config, inputs = trajectory inputs.
FilterModel model_from_sim(const SimConfig& cfg, const Mat& R_guess, const Trajectory& traj);
FilterModel model_from_sim(const SimConfig& cfg, const Mat& R_guess);

}  // namespace kfgrad
