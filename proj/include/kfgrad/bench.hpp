#pragma once

#include <span>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "kfgrad/fd_oracle.hpp"

namespace kfgrad {

enum class BenchMethod { backward, sensitivity, fd };

std::string_view to_string(BenchMethod m) noexcept;
BenchMethod parse_bench_method(std::string_view s);

// One timed cell: median wall time of a full ∂𝓛/∂R computation (filter pass
// included) on the simulated constant-velocity problem with d = 2·axes and
// m = axes, single-threaded.
struct BenchRow {
  BenchMethod method;
  Index d = 0;
  Index m = 0;
  std::size_t steps = 0;
  int reps = 0;
  double median_ms = 0.0;
  std::uint64_t multiplies = 0;  // one repetition
};

BenchRow bench_cell(BenchMethod method, std::size_t axes, std::size_t steps, int reps,
                    std::uint64_t seed);

// Every method on the same problem, repetitions interleaved round-robin.
// Rows come back in the order of `methods`.
std::vector<BenchRow> bench_dimension(std::span<const BenchMethod> methods, std::size_t axes,
                                     std::size_t steps, int reps, std::uint64_t seed);

std::string bench_csv(const std::vector<BenchRow>& rows);
// One row per dimension with each method's median, the ratio to backward and
// log10 of every time, ready for a log-scale plot.
std::string bench_summary_csv(const std::vector<BenchRow>& rows);

}  // namespace kfgrad
