#include "kfgrad/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>

#include "kfgrad/backprop.hpp"
#include "kfgrad/io.hpp"
#include "kfgrad/sensitivity.hpp"
#include "kfgrad/sim.hpp"

namespace kfgrad {

std::string_view to_string(BenchMethod m) noexcept {
  switch (m) {
    case BenchMethod::backward: return "backward";
    case BenchMethod::sensitivity: return "sensitivity";
    case BenchMethod::fd: return "fd";
  }
  return "?";
}

BenchMethod parse_bench_method(std::string_view s) {
  for (BenchMethod m : {BenchMethod::backward, BenchMethod::sensitivity, BenchMethod::fd})
    if (s == to_string(m)) return m;
  throw InvalidArgument("unknown bench method '" + std::string(s) + "'");
}

std::vector<BenchRow> bench_dimension(std::span<const BenchMethod> methods, std::size_t axes,
                                     std::size_t steps, int reps, std::uint64_t seed) {
  if (reps < 1) throw InvalidArgument("bench: reps must be positive");
  SimConfig cfg = SimConfig::defaults(seed, axes);
  cfg.steps = steps;
  const Trajectory traj = simulate(cfg);
  const FilterModel model = model_from_sim(cfg, cfg.R_true, traj);
  const std::vector<Vec>& ys = traj.measurements;
  const NllLoss nll;

  double sink = 0.0;
  auto run_once = [&](BenchMethod method) {
    switch (method) {
      case BenchMethod::backward:
        sink += backward(run_filter(model, ys), nll).dR_static(0, 0);
        break;
      case BenchMethod::sensitivity:
        sink += full_gradient_forward(model, ys, nll, Target::R)(0, 0);
        break;
      case BenchMethod::fd:
        sink += fd_full(model, ys, nll, Target::R)(0, 0);
        break;
    }
  };

  std::vector<BenchRow> rows;
  std::vector<std::vector<double>> times(methods.size());
  for (BenchMethod m : methods) {
    rows.push_back({m, cfg.state_dim(), static_cast<Index>(axes), steps, reps, 0.0, 0});
    reset_op_counts();
    run_once(m);  // warm-up, also the counted repetition
    rows.back().multiplies = op_counts().multiplies;
  }
  // Round-robin over methods so slow drift in machine load hits all of them alike.
  for (int r = 0; r < reps; ++r) {
    for (std::size_t i = 0; i < methods.size(); ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      run_once(methods[i]);
      times[i].push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
  }
  for (std::size_t i = 0; i < methods.size(); ++i) {
    auto& t = times[i];
    std::sort(t.begin(), t.end());
    const std::size_t n = t.size();
    rows[i].median_ms = n % 2 ? t[n / 2] : 0.5 * (t[n / 2 - 1] + t[n / 2]);
  }
  if (!std::isfinite(sink)) throw NumericalError("bench: non-finite gradient");
  return rows;
}

BenchRow bench_cell(BenchMethod method, std::size_t axes, std::size_t steps, int reps,
                    std::uint64_t seed) {
  const BenchMethod one[] = {method};
  return bench_dimension(one, axes, steps, reps, seed).front();
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::map<Index, double> backward_ms;
  for (const auto& r : rows)
    if (r.method == BenchMethod::backward) backward_ms[r.d] = r.median_ms;
  std::string out = "method,d,m,N,repetitions,median_ms,multiplies,ratio_to_backward\n";
  for (const auto& r : rows) {
    auto it = backward_ms.find(r.d);
    const std::string ratio =
        it != backward_ms.end() && it->second > 0.0 ? io::format_double(r.median_ms / it->second) : "";
    out += std::string(to_string(r.method)) + "," + std::to_string(r.d) + "," + std::to_string(r.m) +
           "," + std::to_string(r.steps) + "," + std::to_string(r.reps) + "," +
           io::format_double(r.median_ms) + "," + std::to_string(r.multiplies) + "," + ratio + "\n";
  }
  return out;
}

std::string bench_summary_csv(const std::vector<BenchRow>& rows) {
  std::set<BenchMethod> methods;
  std::map<Index, std::map<BenchMethod, double>> table;
  for (const auto& r : rows) {
    methods.insert(r.method);
    table[r.d][r.method] = r.median_ms;
  }
  std::string out = "d";
  for (BenchMethod m : methods) out += "," + std::string(to_string(m)) + "_ms";
  for (BenchMethod m : methods) out += ",log10_" + std::string(to_string(m)) + "_ms";
  for (BenchMethod m : methods)
    if (m != BenchMethod::backward) out += "," + std::string(to_string(m)) + "_over_backward";
  out += "\n";
  for (const auto& [d, cells] : table) {
    out += std::to_string(d);
    for (BenchMethod m : methods)
      out += "," + (cells.count(m) ? io::format_double(cells.at(m)) : std::string());
    for (BenchMethod m : methods)
      out += "," + (cells.count(m) ? io::format_double(std::log10(cells.at(m))) : std::string());
    for (BenchMethod m : methods) {
      if (m == BenchMethod::backward) continue;
      const bool ok = cells.count(m) && cells.count(BenchMethod::backward);
      out += "," + (ok ? io::format_double(cells.at(m) / cells.at(BenchMethod::backward)) : std::string());
    }
    out += "\n";
  }
  return out;
}

}  // namespace kfgrad
