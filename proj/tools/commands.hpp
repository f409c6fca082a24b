#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "orthosplat/eval.hpp"
#include "orthosplat/fit.hpp"
#include "orthosplat/projection.hpp"

namespace orthosplat::cli {

inline constexpr const char *kToolVersion = "0.1.0";

/// A failure tagged with the pipeline stage it came from.
class StageError : public std::runtime_error {
public:
  StageError(std::string stage, const std::string &what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string &stage() const { return stage_; }

private:
  std::string stage_;
};

struct PartitionArgs {
  std::filesystem::path colmap_dir;
  std::filesystem::path out_dir;
  int cols = 2;
  int rows = 2;
  double ratio = 0.2;
  double threshold = 0.25;
  std::string align = "none";
  int threads = 0;
};

struct RenderArgs {
  std::filesystem::path ply;
  std::filesystem::path out_dir;
  double gsd = 0.1;
  int tile_rows = 1;
  int tile_cols = 1;
  int tiles_in_flight = 1;
  double z_margin = 0.05;
  std::vector<double> background{1.0, 1.0, 1.0};
  int threads = 0;
};

struct EvalGcpArgs {
  std::filesystem::path tdom_dir;
  std::filesystem::path gcp_csv;
  std::filesystem::path out_dir;
  std::string anchor_a;
  std::string anchor_b;
  int threads = 0;
};

struct DepthEdgesArgs {
  std::filesystem::path tdom_dir;
  std::filesystem::path out_dir;
  eval::CannyParams canny;
  int threads = 0;
};

struct FitArgs {
  std::filesystem::path ply_init;
  std::filesystem::path views_dir;
  std::filesystem::path out_dir;
  fit::FitConfig config;
  std::string gradient = "analytic";
  std::vector<std::string> groups{"position", "scale", "rotation", "opacity", "color"};
  int threads = 0;
};

struct ConvertArgs {
  std::filesystem::path colmap_dir;
  std::filesystem::path out_ply;
  std::string align = "none";
  double opacity = 0.1;
  int neighbors = 3;
  int threads = 0;
};

/// Each command writes its data files plus run.json into the output directory (convert:
/// next to the PLY as <name>.run.json) and returns the manifest.
nlohmann::ordered_json cmd_partition(const PartitionArgs &args);
nlohmann::ordered_json cmd_render(const RenderArgs &args);
nlohmann::ordered_json cmd_eval_gcp(const EvalGcpArgs &args);
nlohmann::ordered_json cmd_depth_edges(const DepthEdgesArgs &args);
nlohmann::ordered_json cmd_fit(const FitArgs &args);
nlohmann::ordered_json cmd_convert(const ConvertArgs &args);

/// FNV-1a 64-bit digest of a file's bytes, hex encoded.
std::string file_digest(const std::filesystem::path &path);

nlohmann::json camera_to_json(const projection::Camera &camera);
projection::Camera camera_from_json(const nlohmann::json &j);

/// views.json: {"reference": optional PLY rendered as every target,
///              "views": [{"camera": {...}, "image": optional PNG (sRGB) or PFM (linear)}]}
std::vector<fit::View> load_views(const std::filesystem::path &views_dir,
                                  const Eigen::Vector3d &background);

/// Initial splat radius per point: RMS distance to the k nearest other points.
std::vector<double> knn_scales(const std::vector<Eigen::Vector3d> &points, int k);

double srgb_to_linear(double v);

} // namespace orthosplat::cli
