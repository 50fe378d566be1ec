#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kfgrad/backprop.hpp"
#include "kfgrad/model.hpp"
#include "kfgrad/optimizer.hpp"
#include "kfgrad/sim.hpp"

namespace kfgrad::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

// Matrices are nested row-major arrays, vectors flat arrays.
json to_json(const Mat& m);
json to_json(const Vec& v);
Mat matrix_from_json(const json& j, const std::string& name);
Vec vector_from_json(const json& j, const std::string& name);

// Model file:
//   { "x0": [...], "P0": [[...]], "F": ..., "H": ..., "Q": ..., "R": ...,
//     "B": ... (optional), "data": "relative/or/absolute.csv" (optional) }
// F, B, H, Q, R hold either one matrix (static) or an array of per-step
// matrices. Inputs come from the data CSV.
struct ModelFile {
  FilterModel model;
  std::optional<fs::path> data_path;  // resolved against the model file's directory
};

ModelFile load_model(const fs::path& path);
ModelFile parse_model(const json& j, const fs::path& base_dir = {});
json model_to_json(const FilterModel& model, const std::optional<std::string>& data = std::nullopt);

// Data CSV: header row, columns t, y1..ym, optional u1..up, optional x1..xd.
struct DataSet {
  std::vector<Vec> ys;
  std::vector<Vec> inputs;  // empty when the file has no u columns
  std::vector<Vec> truth;   // empty when the file has no x columns
};

DataSet read_data_csv(const fs::path& path, Index meas_dim, Index input_dim, Index state_dim);
std::string trajectory_csv(const Trajectory& traj, bool include_truth);

json sim_metadata(const SimConfig& cfg);
json gradient_to_json(const GradientSet& g, bool include_steps);
json fit_report_to_json(const FitReport& r);
std::string loss_history_csv(const FitReport& r);

// Shortest round-trip decimal form, independent of locale.
std::string format_double(double v);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

}  // namespace kfgrad::io
