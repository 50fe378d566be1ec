#include "kfgrad/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "kfgrad/backprop.hpp"
#include "kfgrad/bench.hpp"
#include "kfgrad/compare.hpp"
#include "kfgrad/fd_oracle.hpp"
#include "kfgrad/io.hpp"
#include "kfgrad/optimizer.hpp"
#include "kfgrad/sensitivity.hpp"
#include "kfgrad/sim.hpp"

namespace kfgrad::cli {

namespace {

namespace fs = std::filesystem;
using io::json;

class UsageError : public Error {
 public:
  using Error::Error;
};

std::uint64_t default_seed() {
  if (const char* env = std::getenv(kSeedEnv)) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw UsageError(std::string(kSeedEnv) + " must be an unsigned integer");
    }
  }
  return 1;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// Model + data + loss, loaded from the --model / --data / --loss flags.
struct Problem {
  FilterModel model;
  std::vector<Vec> ys;
  std::unique_ptr<LossSpec> loss;
};

Problem load_problem(const std::string& model_path, const std::string& data_flag,
                     const std::string& loss_name) {
  Problem p;
  io::ModelFile mf;
  try {
    mf = io::load_model(model_path);
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    throw IoError(model_path + ": " + e.what());
  }
  fs::path data_path;
  if (!data_flag.empty()) {
    data_path = data_flag;
  } else if (mf.data_path) {
    data_path = *mf.data_path;
  } else {
    throw UsageError("no data: pass --data or set \"data\" in the model file");
  }
  p.model = std::move(mf.model);
  io::DataSet data = io::read_data_csv(data_path, p.model.meas_dim(), p.model.input_dim(),
                                       p.model.state_dim());
  p.ys = std::move(data.ys);
  if (p.model.has_inputs()) p.model.u = std::move(data.inputs);
  try {
    p.model.validate(p.ys.size());
  } catch (const NumericalError&) {
    throw;
  } catch (const Error& e) {
    throw IoError(model_path + ": " + e.what());
  }

  if (loss_name == "nll") {
    p.loss = std::make_unique<NllLoss>();
  } else if (loss_name == "mse") {
    if (data.truth.size() != p.ys.size()) {
      throw IoError(data_path.string() + ": mse loss needs truth columns x1..x" +
                    std::to_string(p.model.state_dim()));
    }
    const Index d = p.model.state_dim();
    p.loss = std::make_unique<MseLoss>(std::move(data.truth), Mat::Identity(d, d));
  } else {
    throw UsageError("unknown loss '" + loss_name + "'");
  }
  return p;
}

std::vector<Target> parse_grad_targets(const std::string& flag) {
  if (flag == "all") return {Target::P0, Target::Q, Target::R, Target::X0, Target::Y};
  std::vector<Target> out;
  for (const auto& s : split_list(flag)) {
    try {
      out.push_back(parse_target(s));
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
  }
  if (out.empty()) throw UsageError("no targets given");
  return out;
}

const char* json_key(Target t) {
  switch (t) {
    case Target::P0: return "dP0";
    case Target::Q: return "dQ";
    case Target::R: return "dR";
    case Target::X0: return "dx0";
    case Target::Y: return "dy";
    case Target::LP0: return "dL_P0";
    case Target::LQ: return "dL_Q";
    case Target::LR: return "dL_R";
  }
  return "?";
}

// Gradient of one target taken from a backward pass, in the assemble() layout.
Mat from_backward(const GradientSet& g, const FilterModel& model, Target t) {
  switch (t) {
    case Target::P0: return g.dP0;
    case Target::Q: return g.dQ_static;
    case Target::R: return g.dR_static;
    case Target::X0: return g.dx0;
    case Target::Y: {
      Mat m(static_cast<Index>(g.dy.size()), model.meas_dim());
      for (std::size_t k = 0; k < g.dy.size(); ++k) m.row(static_cast<Index>(k)) = g.dy[k].transpose();
      return m;
    }
    case Target::LP0: return grad_wrt(g, model, {ParamTag::Kind::L_of_P0});
    case Target::LQ: return grad_wrt(g, model, {ParamTag::Kind::L_of_Q});
    case Target::LR: return grad_wrt(g, model, {ParamTag::Kind::L_of_R});
  }
  throw InvalidArgument("unknown target");
}

json target_json(Target t, const Mat& m) {
  if (t == Target::X0) return io::to_json(Vec(m.col(0)));
  return io::to_json(m);
}

// Twelve significant digits, nested like the JSON output.
std::string short_form(Target t, const Mat& m) {
  std::ostringstream os;
  os << std::setprecision(12);
  auto row = [&](Index i) {
    os << "[";
    for (Index j = 0; j < m.cols(); ++j) os << (j ? ", " : "") << m(i, j);
    os << "]";
  };
  if (t == Target::X0) {
    os << "[";
    for (Index i = 0; i < m.rows(); ++i) os << (i ? ", " : "") << m(i, 0);
    os << "]";
    return os.str();
  }
  os << "[";
  for (Index i = 0; i < m.rows(); ++i) {
    if (i) os << ", ";
    row(i);
  }
  os << "]";
  return os.str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exact reverse-mode gradients of Kalman filter losses"};
  app.name("kfgrad");
  app.require_subcommand(1);

  // simulate
  std::size_t sim_n = 1440;
  double sim_dt = 1.0;
  std::optional<std::uint64_t> sim_seed;
  std::size_t sim_axes = 3;
  std::string sim_prefix;
  bool sim_no_truth = false;
  auto* simulate = app.add_subcommand("simulate", "Simulate the constant-velocity dataset");
  simulate->add_option("--n", sim_n, "Number of steps")->check(CLI::PositiveNumber);
  simulate->add_option("--dt", sim_dt, "Time step")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim_seed, std::string("RNG seed (default: $") + kSeedEnv + " or 1)");
  simulate->add_option("--axes", sim_axes, "Spatial axes (state dim = 2*axes)")->check(CLI::PositiveNumber);
  simulate->add_option("--out-prefix", sim_prefix, "Output prefix")->required();
  simulate->add_flag("--no-truth", sim_no_truth, "Omit true-state columns");

  // grad
  std::string model_path, data_path, loss_name = "nll", method = "backward", target_flag = "all",
                                      out_path;
  bool grad_steps = false, grad_parallel = false;
  auto* grad = app.add_subcommand("grad", "Compute loss gradients");
  grad->add_option("--model", model_path, "Model JSON")->required();
  grad->add_option("--data", data_path, "Data CSV (overrides the model's data entry)");
  grad->add_option("--loss", loss_name, "nll | mse")->check(CLI::IsMember({"nll", "mse"}));
  grad->add_option("--method", method, "backward | sensitivity | fd")
      ->check(CLI::IsMember({"backward", "sensitivity", "fd"}));
  grad->add_option("--target", target_flag, "P0,Q,R,x0,y,L_P0,L_Q,L_R or all");
  grad->add_option("--out", out_path, "Output JSON")->required();
  grad->add_flag("--steps", grad_steps, "Include per-step dQ/dR (backward only)");
  grad->add_flag("--parallel", grad_parallel, "Spread sensitivity/fd coordinates over OpenMP threads");

  // check
  double tol_fd = 1e-5, tol_fwd = 1e-8;
  std::string check_targets = "all";
  bool corrupt = false;
  auto* check = app.add_subcommand("check", "Compare backward, sensitivity and finite differences");
  check->add_option("--model", model_path, "Model JSON")->required();
  check->add_option("--data", data_path, "Data CSV");
  check->add_option("--loss", loss_name, "nll | mse")->check(CLI::IsMember({"nll", "mse"}));
  check->add_option("--target", check_targets, "Targets to audit, or all");
  check->add_option("--tol-fd", tol_fd, "Tolerance against finite differences");
  check->add_option("--tol-fwd", tol_fwd, "Tolerance against forward sensitivity");
  check->add_flag("--corrupt-backward", corrupt)->group("");  // negative-control hook for tests

  // fit
  std::string fit_targets = "R", fit_prefix;
  double alpha = 0.005, stop_tol = 0.0, init_scale = 4.0;
  std::size_t iters = 100;
  auto* fitc = app.add_subcommand("fit", "Gradient-descent maximum-likelihood fit of covariance factors");
  fitc->add_option("--model", model_path, "Model JSON")->required();
  fitc->add_option("--data", data_path, "Data CSV");
  fitc->add_option("--loss", loss_name, "nll | mse")->check(CLI::IsMember({"nll", "mse"}));
  fitc->add_option("--targets", fit_targets, "Comma list of R, Q, P0");
  fitc->add_option("--alpha", alpha, "Step size")->check(CLI::NonNegativeNumber);
  fitc->add_option("--iters", iters, "Maximum iterations");
  fitc->add_option("--stop-tol", stop_tol, "Relative loss-change stop threshold (0 disables)")
      ->check(CLI::NonNegativeNumber);
  fitc->add_option("--init-scale", init_scale, "Start from chol(scale * mean-diag * I)")
      ->check(CLI::PositiveNumber);
  fitc->add_option("--out-prefix", fit_prefix, "Output prefix")->required();

  // bench
  std::string dims_flag = "2,4,6,8", methods_flag = "backward,sensitivity", bench_prefix = "bench";
  std::size_t bench_n = 1440;
  int reps = 9;
  std::optional<std::uint64_t> bench_seed;
  auto* bench = app.add_subcommand("bench", "Time one full R-gradient per method and dimension");
  bench->add_option("--dims", dims_flag, "Comma list of even state dimensions");
  bench->add_option("--n", bench_n, "Steps")->check(CLI::PositiveNumber);
  bench->add_option("--reps", reps, "Repetitions (>= 5)");
  bench->add_option("--methods", methods_flag, "Comma list of backward, sensitivity, fd");
  bench->add_option("--seed", bench_seed, "RNG seed");
  bench->add_option("--out-prefix", bench_prefix, "Output prefix");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kUsage;
  }

  try {
    if (simulate->parsed()) {
      SimConfig cfg = SimConfig::defaults(sim_seed.value_or(default_seed()), sim_axes);
      cfg.steps = sim_n;
      cfg.dt = sim_dt;
      const Trajectory traj = kfgrad::simulate(cfg);
      const fs::path csv = sim_prefix + ".csv";
      io::write_text(csv, io::trajectory_csv(traj, !sim_no_truth));
      io::write_text(sim_prefix + ".meta.json", io::sim_metadata(cfg).dump(2) + "\n");
      FilterModel model = model_from_sim(cfg, cfg.R_true, traj);
      io::write_text(sim_prefix + ".model.json",
                     io::model_to_json(model, csv.filename().string()).dump(2) + "\n");
      out << "wrote " << csv.string() << " (" << cfg.steps << " rows), " << sim_prefix
          << ".meta.json, " << sim_prefix << ".model.json\n";
      return kOk;
    }

    if (grad->parsed()) {
      const Problem p = load_problem(model_path, data_path, loss_name);
      const auto targets = parse_grad_targets(target_flag);
      const ExecPolicy policy = grad_parallel ? ExecPolicy::parallel : ExecPolicy::serial;
      json j;
      j["method"] = method;
      j["loss_name"] = loss_name;
      j["target"] = target_flag;
      if (method == "backward") {
        const FilterTape tape = run_filter(p.model, p.ys);
        const bool factors = std::any_of(targets.begin(), targets.end(), is_factor_target);
        const GradientSet g = backward(tape, *p.loss, BackwardOptions{factors});
        j["loss"] = g.loss;
        for (Target t : targets) {
          if (t == Target::Y) {
            j["dy"] = io::gradient_to_json(g, false)["dy"];
          } else {
            j[json_key(t)] = target_json(t, from_backward(g, p.model, t));
          }
        }
        if (grad_steps) {
          const json full = io::gradient_to_json(g, true);
          j["dQ_steps"] = full["dQ_steps"];
          j["dR_steps"] = full["dR_steps"];
        }
      } else {
        j["loss"] = evaluate_loss(p.model, p.ys, *p.loss);
        for (Target t : targets) {
          const Mat gm = method == "sensitivity"
                             ? full_gradient_forward(p.model, p.ys, *p.loss, t, policy)
                             : fd_full(p.model, p.ys, *p.loss, t, FdConfig{}, policy);
          j[json_key(t)] = target_json(t, gm);
        }
      }
      io::write_text(out_path, j.dump(2) + "\n");
      out << "wrote " << out_path << "\n";
      return kOk;
    }

    if (check->parsed()) {
      const Problem p = load_problem(model_path, data_path, loss_name);
      const auto targets = parse_grad_targets(check_targets);
      const FilterTape tape = run_filter(p.model, p.ys);
      const bool factors = std::any_of(targets.begin(), targets.end(), is_factor_target);
      const GradientSet g = backward(tape, *p.loss, BackwardOptions{factors});
      bool ok = true;
      out << std::setprecision(6);
      out << "loss = " << g.loss << "\n";
      out << "target  max_rel_vs_fd  max_rel_vs_sensitivity  status\n";
      for (Target t : targets) {
        Mat b = from_backward(g, p.model, t);
        if (corrupt && b.size() > 0) b(0, 0) += 1e-3 * std::max(1.0, std::abs(b(0, 0)));
        const Mat fd = fd_full(p.model, p.ys, *p.loss, t, FdConfig::extrapolated());
        const Mat fwd = full_gradient_forward(p.model, p.ys, *p.loss, t);
        const Discrepancy dfd = compare(b, fd);
        const Discrepancy dfw = compare(b, fwd);
        const bool pass = dfd.within(tol_fd, 1e-8) && dfw.within(tol_fwd, 1e-8);
        ok = ok && pass;
        out << std::left << std::setw(8) << to_string(t) << std::setw(15) << dfd.relative
            << std::setw(24) << dfw.relative << (pass ? "ok" : "FAIL") << "\n";
        if (!pass) {
          const Discrepancy& worst = dfd.within(tol_fd, 1e-8) ? dfw : dfd;
          out << "  worst coordinate (" << worst.row << "," << worst.col
              << "): backward=" << worst.actual << " reference=" << worst.reference << "\n";
        }
        if (b.size() <= 16) out << "  backward " << to_string(t) << " = " << short_form(t, b) << "\n";
      }
      out << (ok ? "check passed" : "check FAILED") << "\n";
      return ok ? kOk : kCheckFailed;
    }

    if (fitc->parsed()) {
      const Problem p = load_problem(model_path, data_path, loss_name);
      FitConfig cfg;
      cfg.targets.clear();
      for (const auto& s : split_list(fit_targets)) {
        const Target t = parse_target(s);
        if (!is_symmetric_target(t)) throw UsageError("fit targets must be R, Q or P0");
        cfg.targets.push_back(t);
      }
      cfg.alpha = alpha;
      cfg.max_iters = iters;
      cfg.stop_tol = stop_tol;
      for (Target t : cfg.targets) {
        const Mat& current = t == Target::R ? p.model.R.at(0) : t == Target::Q ? p.model.Q.at(0) : p.model.P0;
        cfg.init_factors[t] = default_initial_factor(current, init_scale);
      }
      const FitReport r = fit(p.model, p.ys, *p.loss, cfg);
      io::write_text(fit_prefix + ".fit.json", io::fit_report_to_json(r).dump(2) + "\n");
      io::write_text(fit_prefix + ".loss.csv", io::loss_history_csv(r));
      out << "iterations " << r.iterations << ", loss " << r.loss_history.front() << " -> "
          << r.loss_history.back() << "\nwrote " << fit_prefix << ".fit.json, " << fit_prefix
          << ".loss.csv\n";
      return kOk;
    }

    if (bench->parsed()) {
      if (reps < 5) throw UsageError("--reps must be at least 5");
      std::vector<std::size_t> axes;
      for (const auto& s : split_list(dims_flag)) {
        std::size_t d = 0;
        try {
          d = std::stoul(s);
        } catch (const std::exception&) {
          throw UsageError("bad dimension '" + s + "'");
        }
        if (d < 2 || d % 2) throw UsageError("dimensions must be even and >= 2");
        axes.push_back(d / 2);
      }
      std::vector<BenchMethod> methods;
      for (const auto& s : split_list(methods_flag)) {
        try {
          methods.push_back(parse_bench_method(s));
        } catch (const InvalidArgument& e) {
          throw UsageError(e.what());
        }
      }
      if (axes.empty() || methods.empty()) throw UsageError("nothing to benchmark");
      std::vector<BenchRow> rows;
      const std::uint64_t seed = bench_seed.value_or(default_seed());
      for (std::size_t a : axes) {
        for (const BenchRow& r : bench_dimension(methods, a, bench_n, reps, seed)) {
          rows.push_back(r);
          const BenchMethod m = r.method;
          out << to_string(m) << " d=" << r.d << " m=" << r.m << " N=" << r.steps
              << " median_ms=" << r.median_ms << " multiplies=" << r.multiplies << "\n";
        }
      }
      io::write_text(bench_prefix + ".csv", bench_csv(rows));
      io::write_text(bench_prefix + ".summary.csv", bench_summary_csv(rows));
      out << "wrote " << bench_prefix << ".csv, " << bench_prefix << ".summary.csv\n";
      return kOk;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace kfgrad::cli
