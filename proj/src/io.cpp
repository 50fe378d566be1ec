#include "kfgrad/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>

namespace kfgrad::io {

namespace {

[[noreturn]] void bad(const std::string& name, const std::string& why) {
  throw InvalidArgument("model file: '" + name + "' " + why);
}

double number(const json& j, const std::string& name) {
  if (!j.is_number()) bad(name, "must contain only numbers");
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad(name, "contains a non-finite value");
  return v;
}

int depth(const json& j) {
  int n = 0;
  const json* cur = &j;
  while (cur->is_array() && !cur->empty()) {
    ++n;
    cur = &cur->front();
  }
  return n;
}

StepSeries<Mat> series_from_json(const json& j, const std::string& name) {
  if (depth(j) == 3) {
    std::vector<Mat> values;
    for (std::size_t k = 0; k < j.size(); ++k)
      values.push_back(matrix_from_json(j[k], name + "[" + std::to_string(k) + "]"));
    return StepSeries<Mat>::per_step(std::move(values));
  }
  return StepSeries<Mat>(matrix_from_json(j, name));
}

json series_to_json(const StepSeries<Mat>& s) {
  if (s.is_static()) return to_json(s.at(0));
  json arr = json::array();
  for (const Mat& m : s.values()) arr.push_back(to_json(m));
  return arr;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view cell = line.substr(start, comma - start);
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r'))
      cell.remove_suffix(1);
    out.push_back(cell);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_cell(std::string_view cell, std::size_t line, const fs::path& path) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
    throw IoError(path.string() + ":" + std::to_string(line) + ": cannot parse '" +
                  std::string(cell) + "' as a finite number");
  }
  return v;
}

}  // namespace

json to_json(const Mat& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const Vec& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Mat matrix_from_json(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty()) bad(name, "must be a non-empty array of rows");
  const std::size_t rows = j.size();
  if (!j[0].is_array() || j[0].empty()) bad(name, "must be a non-empty array of rows");
  const std::size_t cols = j[0].size();
  Mat m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) bad(name, "has ragged rows");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Index>(r), static_cast<Index>(c)) = number(j[r][c], name);
  }
  return m;
}

Vec vector_from_json(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty()) bad(name, "must be a non-empty array");
  Vec v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = number(j[i], name);
  return v;
}

ModelFile parse_model(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw InvalidArgument("model file: top level must be an object");
  for (const char* key : {"x0", "P0", "F", "H", "Q", "R"}) {
    if (!j.contains(key)) bad(key, "is required");
  }
  ModelFile out;
  FilterModel& m = out.model;
  m.x0 = vector_from_json(j["x0"], "x0");
  m.P0 = matrix_from_json(j["P0"], "P0");
  m.F = series_from_json(j["F"], "F");
  m.H = series_from_json(j["H"], "H");
  m.Q = series_from_json(j["Q"], "Q");
  m.R = series_from_json(j["R"], "R");
  if (j.contains("B") && !j["B"].is_null()) m.B = series_from_json(j["B"], "B");

  auto check_dim = [&](const char* key, Index expected) {
    if (j.contains(key) && j[key].get<Index>() != expected) {
      bad(key, "disagrees with the matrices (" + std::to_string(expected) + ")");
    }
  };
  check_dim("state_dim", m.state_dim());
  check_dim("meas_dim", m.meas_dim());
  check_dim("input_dim", m.input_dim());

  if (j.contains("data")) {
    if (!j["data"].is_string()) bad("data", "must be a path string");
    fs::path p = j["data"].get<std::string>();
    out.data_path = p.is_absolute() ? p : base_dir / p;
  }
  return out;
}

ModelFile load_model(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw IoError(path.string() + ": invalid JSON: " + e.what());
  }
  return parse_model(j, path.parent_path());
}

json model_to_json(const FilterModel& model, const std::optional<std::string>& data) {
  json j;
  j["state_dim"] = model.state_dim();
  j["meas_dim"] = model.meas_dim();
  j["input_dim"] = model.input_dim();
  j["x0"] = to_json(model.x0);
  j["P0"] = to_json(model.P0);
  j["F"] = series_to_json(model.F);
  if (model.has_inputs()) j["B"] = series_to_json(model.B);
  j["H"] = series_to_json(model.H);
  j["Q"] = series_to_json(model.Q);
  j["R"] = series_to_json(model.R);
  if (data) j["data"] = *data;
  return j;
}

DataSet read_data_csv(const fs::path& path, Index meas_dim, Index input_dim, Index state_dim) {
  std::istringstream in(read_text(path));
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty file, header row required");
  ++line_no;
  const auto header = split(line);
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  };
  auto columns = [&](char prefix, Index n, bool required) {
    std::vector<std::size_t> idx;
    for (Index i = 1; i <= n; ++i) {
      auto c = column(std::string(1, prefix) + std::to_string(i));
      if (!c) {
        if (required || !idx.empty()) {
          throw IoError(path.string() + ": missing column " + std::string(1, prefix) +
                        std::to_string(i));
        }
        return idx;
      }
      idx.push_back(*c);
    }
    return idx;
  };
  const auto y_cols = columns('y', meas_dim, true);
  const auto u_cols = columns('u', input_dim, input_dim > 0);
  const auto x_cols = columns('x', state_dim, false);

  DataSet data;
  auto take = [&](const std::vector<std::size_t>& cols, const std::vector<std::string_view>& cells) {
    Vec v(static_cast<Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i)
      v(static_cast<Index>(i)) = parse_cell(cells[cols[i]], line_no, path);
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                    std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
    }
    data.ys.push_back(take(y_cols, cells));
    if (!u_cols.empty()) data.inputs.push_back(take(u_cols, cells));
    if (!x_cols.empty()) data.truth.push_back(take(x_cols, cells));
  }
  if (data.ys.empty()) throw IoError(path.string() + ": no data rows");
  return data;
}

std::string trajectory_csv(const Trajectory& traj, bool include_truth) {
  const Index m = traj.measurements.empty() ? 0 : traj.measurements.front().size();
  const Index p = traj.inputs.empty() ? 0 : traj.inputs.front().size();
  const Index d = traj.true_states.empty() ? 0 : traj.true_states.front().size();
  std::string out = "t";
  for (Index i = 1; i <= m; ++i) out += ",y" + std::to_string(i);
  for (Index i = 1; i <= p; ++i) out += ",u" + std::to_string(i);
  if (include_truth)
    for (Index i = 1; i <= d; ++i) out += ",x" + std::to_string(i);
  out += '\n';
  for (std::size_t k = 0; k < traj.measurements.size(); ++k) {
    out += std::to_string(k + 1);
    for (Index i = 0; i < m; ++i) out += "," + format_double(traj.measurements[k](i));
    for (Index i = 0; i < p; ++i) out += "," + format_double(traj.inputs[k](i));
    if (include_truth)
      for (Index i = 0; i < d; ++i) out += "," + format_double(traj.true_states[k](i));
    out += '\n';
  }
  return out;
}

json sim_metadata(const SimConfig& cfg) {
  json j;
  j["steps"] = cfg.steps;
  j["dt"] = cfg.dt;
  j["axes"] = cfg.axes;
  j["seed"] = cfg.seed;
  j["rng"] = std::string(Rng::kName);
  j["Q_true"] = to_json(cfg.Q_true);
  j["R_true"] = to_json(cfg.R_true);
  j["x0_true"] = to_json(cfg.x0_true);
  j["P0"] = to_json(cfg.P0);
  j["input_profile"] = std::string(to_string(cfg.input_profile));
  j["accel_amplitude"] = cfg.accel_amplitude;
  j["input_convention"] = "row t holds u_t, the input used to predict step t (acceleration a_{t-1})";
  return j;
}

json gradient_to_json(const GradientSet& g, bool include_steps) {
  json j;
  j["loss"] = g.loss;
  j["dP0"] = to_json(g.dP0);
  j["dQ"] = to_json(g.dQ_static);
  j["dR"] = to_json(g.dR_static);
  j["dx0"] = to_json(g.dx0);
  json dy = json::array();
  for (const Vec& v : g.dy) dy.push_back(to_json(v));
  j["dy"] = std::move(dy);
  if (include_steps) {
    json q = json::array(), r = json::array();
    for (const Mat& m : g.dQ_steps) q.push_back(to_json(m));
    for (const Mat& m : g.dR_steps) r.push_back(to_json(m));
    j["dQ_steps"] = std::move(q);
    j["dR_steps"] = std::move(r);
  }
  if (g.dL_P0) j["dL_P0"] = to_json(*g.dL_P0);
  if (g.dL_Q) j["dL_Q"] = to_json(*g.dL_Q);
  if (g.dL_R) j["dL_R"] = to_json(*g.dL_R);
  return j;
}

json fit_report_to_json(const FitReport& r) {
  json j;
  j["alpha"] = r.alpha;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["backtracks"] = r.backtracks;
  j["wall_time_ms"] = r.wall_time_ms;
  j["loss_history"] = r.loss_history;
  j["grad_norm_history"] = r.grad_norm_history;
  j["final_loss"] = r.loss_history.empty() ? json(nullptr) : json(r.loss_history.back());
  json params = json::object();
  for (const auto& [t, l] : r.factors) {
    json p;
    p["initial_factor"] = to_json(r.initial_factors.at(t));
    p["factor"] = to_json(l);
    p["covariance"] = to_json(r.covariances.at(t));
    params[std::string(to_string(t))] = std::move(p);
  }
  j["parameters"] = std::move(params);
  return j;
}

std::string loss_history_csv(const FitReport& r) {
  std::string out = "iteration,loss,grad_norm,wall_ms\n";
  for (std::size_t k = 0; k < r.loss_history.size(); ++k) {
    out += std::to_string(k) + "," + format_double(r.loss_history[k]) + "," +
           format_double(r.grad_norm_history[k]) + "," + format_double(r.wall_ms[k]) + "\n";
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw NumericalError("format_double: conversion failed");
  return std::string(buf, ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace kfgrad::io
