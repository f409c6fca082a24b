#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "orthosplat/core.hpp"
#include "orthosplat/sparse_model.hpp"

namespace orthosplat::partition {

inline constexpr double kDefaultExpansionRatio = 0.2;
inline constexpr double kDefaultVisibilityThreshold = 0.25;

/// Ground-plane rectangle [x0, x1] x [y0, y1] in world meters.
struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
};

struct Cell {
  int row = 0;
  int col = 0;
  Rect core_bounds;
  Rect expanded_bounds;
  /// Outer edges of the grid are unbounded for membership tests.
  bool open_x0 = false, open_x1 = false, open_y0 = false, open_y1 = false;
  /// Cameras assigned by position (quantile split), sorted.
  std::vector<int> camera_ids;
  /// Cameras chosen by visibility, sorted.
  std::vector<int> selected_camera_ids;
  std::vector<std::size_t> point_indices;

  /// Half-open membership: min edges inclusive, max edges exclusive.
  bool core_contains(const Eigen::Vector2d &p) const;
  bool expanded_contains(const Eigen::Vector2d &p) const;
};

/// `cols` x `rows` cells stored column-major: cell(row, col) = cells[col * rows + row].
struct PartitionPlan {
  int cols = 1;
  int rows = 1;
  std::vector<Cell> cells;
  double expansion_ratio = kDefaultExpansionRatio;
  double visibility_threshold = kDefaultVisibilityThreshold;
  /// Vertical range of cell bounding boxes used for visibility.
  double z_min = 0.0;
  double z_max = 0.0;
  std::vector<std::string> warnings;

  Cell &cell(int row, int col) { return cells[static_cast<std::size_t>(col) * rows + row]; }
  const Cell &cell(int row, int col) const {
    return cells[static_cast<std::size_t>(col) * rows + row];
  }
};

Eigen::Vector2d ground(const Eigen::Vector3d &p);

/// Splits cameras into `cols` x-quantile bands and each band into `rows` y-quantile cells.
/// `extent` is grown to include every camera center and becomes the outer boundary.
PartitionPlan partition_cameras(std::span<const CameraRecord> cameras, int cols, int rows,
                                Rect extent);
PartitionPlan partition_cameras(std::span<const CameraRecord> cameras, int cols, int rows);

Rect expand(const Rect &core, double ratio);

/// Sets `cell.expanded_bounds` and returns indices of points inside them.
std::vector<std::size_t> select_points(Cell &cell, std::span<const Eigen::Vector2d> points,
                                       double expansion_ratio);

/// Fraction of the image covered by the projection of the box `bounds` x [z_min, z_max].
double visibility(const Rect &bounds, double z_min, double z_max,
                  const projection::PerspectiveCamera &camera);
double visibility(const Cell &cell, const PartitionPlan &plan, const CameraRecord &camera);

/// Adds cameras whose visibility reaches `threshold` to each cell, then every point observed
/// by them (track membership, or frustum containment when the model has no tracks). Cells
/// left without selected cameras produce warnings in `plan.warnings`.
void select_cameras(PartitionPlan &plan, const SparseModel &model, double threshold);

/// All three steps: quantile cells, expanded point selection, visibility selection.
PartitionPlan build_plan(const SparseModel &model, int cols, int rows, double expansion_ratio,
                         double visibility_threshold);

/// Per-cell scenes holding the splats whose centers fall in each cell's expanded bounds.
std::vector<core::SplatScene> split_scene(const core::SplatScene &scene,
                                          const PartitionPlan &plan);

/// Keeps each cell's splats whose centers fall in its core bounds, concatenates the cells in
/// order and removes exact duplicates.
core::SplatScene merge_cells(std::span<const core::SplatScene> cell_scenes,
                             const PartitionPlan &plan);

/// Deterministic JSON manifest: one record per cell.
std::string plan_manifest(const PartitionPlan &plan);

} // namespace orthosplat::partition
