#include "orthosplat/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <json.hpp>

#include "orthosplat/error.hpp"

namespace orthosplat::partition {

using projection::PerspectiveCamera;

Eigen::Vector2d ground(const Eigen::Vector3d &p) { return p.head<2>(); }

bool Cell::core_contains(const Eigen::Vector2d &p) const {
  return (open_x0 || p.x() >= core_bounds.x0) && (open_x1 || p.x() < core_bounds.x1) &&
         (open_y0 || p.y() >= core_bounds.y0) && (open_y1 || p.y() < core_bounds.y1);
}

bool Cell::expanded_contains(const Eigen::Vector2d &p) const {
  return (open_x0 || p.x() >= expanded_bounds.x0) && (open_x1 || p.x() < expanded_bounds.x1) &&
         (open_y0 || p.y() >= expanded_bounds.y0) && (open_y1 || p.y() < expanded_bounds.y1);
}

namespace {

/// Sizes of `parts` near-equal groups of `n` items, larger groups first.
std::vector<std::size_t> balanced_counts(std::size_t n, int parts) {
  std::vector<std::size_t> counts(parts, n / parts);
  for (std::size_t i = 0; i < n % parts; ++i)
    ++counts[i];
  return counts;
}

} // namespace

PartitionPlan partition_cameras(std::span<const CameraRecord> cameras, int cols, int rows,
                                Rect extent) {
  if (cols < 1 || rows < 1)
    throw InvalidInput("partition grid needs at least one row and one column");
  const auto cells = static_cast<std::size_t>(cols) * rows;
  if (cameras.size() < cells)
    throw InvalidInput("partition needs at least " + std::to_string(cells) + " cameras, got " +
                       std::to_string(cameras.size()));

  std::vector<Eigen::Vector2d> centers(cameras.size());
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    centers[i] = ground(cameras[i].pose().center());
    extent.x0 = std::min(extent.x0, centers[i].x());
    extent.x1 = std::max(extent.x1, centers[i].x());
    extent.y0 = std::min(extent.y0, centers[i].y());
    extent.y1 = std::max(extent.y1, centers[i].y());
  }

  PartitionPlan plan;
  plan.cols = cols;
  plan.rows = rows;
  plan.cells.resize(cells);

  std::vector<std::size_t> by_x(cameras.size());
  std::iota(by_x.begin(), by_x.end(), std::size_t{0});
  std::sort(by_x.begin(), by_x.end(), [&](std::size_t a, std::size_t b) {
    const auto &pa = centers[a], &pb = centers[b];
    if (pa.x() != pb.x())
      return pa.x() < pb.x();
    if (pa.y() != pb.y())
      return pa.y() < pb.y();
    return cameras[a].id < cameras[b].id;
  });

  const auto col_counts = balanced_counts(cameras.size(), cols);
  std::size_t begin = 0;
  double x_lo = extent.x0;
  for (int c = 0; c < cols; ++c) {
    const std::size_t end = begin + col_counts[c];
    const double x_hi =
        c + 1 == cols ? extent.x1 : 0.5 * (centers[by_x[end - 1]].x() + centers[by_x[end]].x());

    std::vector<std::size_t> band(by_x.begin() + begin, by_x.begin() + end);
    std::sort(band.begin(), band.end(), [&](std::size_t a, std::size_t b) {
      const auto &pa = centers[a], &pb = centers[b];
      if (pa.y() != pb.y())
        return pa.y() < pb.y();
      if (pa.x() != pb.x())
        return pa.x() < pb.x();
      return cameras[a].id < cameras[b].id;
    });
    const auto row_counts = balanced_counts(band.size(), rows);
    std::size_t rb = 0;
    double y_lo = extent.y0;
    for (int r = 0; r < rows; ++r) {
      const std::size_t re = rb + row_counts[r];
      const double y_hi =
          r + 1 == rows ? extent.y1 : 0.5 * (centers[band[re - 1]].y() + centers[band[re]].y());
      Cell &cell = plan.cell(r, c);
      cell.row = r;
      cell.col = c;
      cell.core_bounds = {x_lo, y_lo, x_hi, y_hi};
      cell.expanded_bounds = cell.core_bounds;
      cell.open_x0 = c == 0;
      cell.open_x1 = c + 1 == cols;
      cell.open_y0 = r == 0;
      cell.open_y1 = r + 1 == rows;
      for (std::size_t k = rb; k < re; ++k)
        cell.camera_ids.push_back(cameras[band[k]].id);
      std::sort(cell.camera_ids.begin(), cell.camera_ids.end());
      rb = re;
      y_lo = y_hi;
    }
    begin = end;
    x_lo = x_hi;
  }
  return plan;
}

PartitionPlan partition_cameras(std::span<const CameraRecord> cameras, int cols, int rows) {
  const double inf = std::numeric_limits<double>::infinity();
  return partition_cameras(cameras, cols, rows, Rect{inf, inf, -inf, -inf});
}

Rect expand(const Rect &core, double ratio) {
  if (!(ratio >= 0.0))
    throw InvalidInput("expansion ratio must be non-negative");
  const double dx = ratio * core.width(), dy = ratio * core.height();
  return {core.x0 - dx, core.y0 - dy, core.x1 + dx, core.y1 + dy};
}

std::vector<std::size_t> select_points(Cell &cell, std::span<const Eigen::Vector2d> points,
                                       double expansion_ratio) {
  cell.expanded_bounds = expand(cell.core_bounds, expansion_ratio);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (cell.expanded_contains(points[i]))
      out.push_back(i);
  return out;
}

namespace {

using Poly = std::vector<Eigen::Vector2d>;

double cross(const Eigen::Vector2d &o, const Eigen::Vector2d &a, const Eigen::Vector2d &b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

/// Andrew's monotone chain, counter-clockwise, collinear points dropped.
Poly convex_hull(Poly pts) {
  std::sort(pts.begin(), pts.end(), [](const auto &a, const auto &b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3)
    return pts;
  Poly hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto &p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0)
      --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0)
      --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

/// Sutherland-Hodgman against the half-plane sign * (p[axis] - bound) >= 0.
Poly clip(const Poly &poly, int axis, double bound, double sign) {
  Poly out;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto &a = poly[i];
    const auto &b = poly[(i + 1) % n];
    const double da = sign * (a[axis] - bound);
    const double db = sign * (b[axis] - bound);
    if (da >= 0.0)
      out.push_back(a);
    if ((da >= 0.0) != (db >= 0.0)) {
      const double t = da / (da - db);
      Eigen::Vector2d p = a + t * (b - a);
      p[axis] = bound;
      out.push_back(p);
    }
  }
  return out;
}

double polygon_area(const Poly &poly) {
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto &a = poly[i];
    const auto &b = poly[(i + 1) % poly.size()];
    twice += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * std::abs(twice);
}

} // namespace

double visibility(const Rect &bounds, double z_min, double z_max,
                  const PerspectiveCamera &camera) {
  camera.validate();
  const double near = camera.z_near;
  const double fx = camera.width * camera.z_near / (2.0 * camera.right());
  const double fy = camera.height * camera.z_near / (2.0 * camera.top());

  std::array<Eigen::Vector3d, 8> corners;
  for (int i = 0; i < 8; ++i) {
    const Eigen::Vector3d world{(i & 1) ? bounds.x1 : bounds.x0, (i & 2) ? bounds.y1 : bounds.y0,
                                (i & 4) ? z_max : z_min};
    corners[i] = camera.pose.to_view(world);
  }
  // The box clipped to z >= near: its front corners plus edge crossings of the near plane.
  std::vector<Eigen::Vector3d> front;
  for (const auto &c : corners)
    if (c.z() >= near)
      front.push_back(c);
  if (front.empty())
    return 0.0;
  for (int a = 0; a < 8; ++a)
    for (int bit : {1, 2, 4}) {
      const int b = a | bit;
      if (b == a)
        continue;
      const auto &pa = corners[a], &pb = corners[b];
      if ((pa.z() >= near) != (pb.z() >= near)) {
        const double t = (near - pa.z()) / (pb.z() - pa.z());
        Eigen::Vector3d p = pa + t * (pb - pa);
        p.z() = near;
        front.push_back(p);
      }
    }

  Poly projected;
  projected.reserve(front.size());
  for (const auto &p : front)
    projected.emplace_back(0.5 * camera.width + fx * p.x() / p.z(),
                           0.5 * camera.height - fy * p.y() / p.z());
  Poly hull = convex_hull(std::move(projected));
  if (hull.size() < 3)
    return 0.0;
  hull = clip(hull, 0, 0.0, 1.0);
  hull = clip(hull, 0, static_cast<double>(camera.width), -1.0);
  hull = clip(hull, 1, 0.0, 1.0);
  hull = clip(hull, 1, static_cast<double>(camera.height), -1.0);
  if (hull.size() < 3)
    return 0.0;
  const double image_area = static_cast<double>(camera.width) * camera.height;
  const double ratio = polygon_area(hull) / image_area;
  return ratio > 1.0 - 1e-12 ? 1.0 : std::max(ratio, 0.0);
}

double visibility(const Cell &cell, const PartitionPlan &plan, const CameraRecord &camera) {
  return visibility(cell.expanded_bounds, plan.z_min, plan.z_max, camera.camera);
}

namespace {

bool in_frustum(const Eigen::Vector3d &world, const PerspectiveCamera &cam) {
  const Eigen::Vector3d v = cam.pose.to_view(world);
  if (!(v.z() > cam.z_near && v.z() < cam.z_far))
    return false;
  const double x = v.x() * cam.z_near / v.z(), y = v.y() * cam.z_near / v.z();
  return std::abs(x) <= cam.right() && std::abs(y) <= cam.top();
}

} // namespace

void select_cameras(PartitionPlan &plan, const SparseModel &model, double threshold) {
  if (!(threshold > 0.0))
    throw InvalidInput("visibility threshold must be positive");
  plan.visibility_threshold = threshold;
  bool has_tracks = false;
  for (const auto &p : model.points)
    has_tracks = has_tracks || !p.track.empty();

  for (auto &cell : plan.cells) {
    cell.selected_camera_ids.clear();
    std::vector<const CameraRecord *> chosen;
    for (const auto &cam : model.cameras)
      if (visibility(cell, plan, cam) >= threshold) {
        cell.selected_camera_ids.push_back(cam.id);
        chosen.push_back(&cam);
      }
    std::sort(cell.selected_camera_ids.begin(), cell.selected_camera_ids.end());

    std::set<std::size_t> points(cell.point_indices.begin(), cell.point_indices.end());
    for (std::size_t i = 0; i < model.points.size(); ++i) {
      const auto &pt = model.points[i];
      for (const auto *cam : chosen) {
        const bool covered =
            has_tracks ? std::find(pt.track.begin(), pt.track.end(), cam->id) != pt.track.end()
                       : in_frustum(pt.xyz, cam->camera);
        if (covered) {
          points.insert(i);
          break;
        }
      }
    }
    cell.point_indices.assign(points.begin(), points.end());
    if (cell.selected_camera_ids.empty())
      plan.warnings.push_back("cell (" + std::to_string(cell.row) + ", " +
                              std::to_string(cell.col) + ") has no cameras above visibility " +
                              "threshold " + std::to_string(threshold));
  }
}

PartitionPlan build_plan(const SparseModel &model, int cols, int rows, double expansion_ratio,
                         double visibility_threshold) {
  const double inf = std::numeric_limits<double>::infinity();
  Rect extent{inf, inf, -inf, -inf};
  double z_min = inf, z_max = -inf;
  std::vector<Eigen::Vector2d> ground_points(model.points.size());
  for (std::size_t i = 0; i < model.points.size(); ++i) {
    const auto &p = model.points[i].xyz;
    ground_points[i] = ground(p);
    extent.x0 = std::min(extent.x0, p.x());
    extent.x1 = std::max(extent.x1, p.x());
    extent.y0 = std::min(extent.y0, p.y());
    extent.y1 = std::max(extent.y1, p.y());
    z_min = std::min(z_min, p.z());
    z_max = std::max(z_max, p.z());
  }
  PartitionPlan plan = partition_cameras(model.cameras, cols, rows, extent);
  plan.expansion_ratio = expansion_ratio;
  plan.z_min = std::isfinite(z_min) ? z_min : 0.0;
  plan.z_max = std::isfinite(z_max) ? z_max : 0.0;
  for (auto &cell : plan.cells)
    cell.point_indices = select_points(cell, ground_points, expansion_ratio);
  select_cameras(plan, model, visibility_threshold);
  return plan;
}

std::vector<core::SplatScene> split_scene(const core::SplatScene &scene,
                                          const PartitionPlan &plan) {
  std::vector<core::SplatScene> out;
  out.reserve(plan.cells.size());
  for (const auto &cell : plan.cells) {
    core::SplatScene part(scene.sh_degree());
    part.crs_note = scene.crs_note;
    for (std::size_t i = 0; i < scene.size(); ++i)
      if (cell.expanded_contains(ground(scene.centers()[i])))
        part.push_back(scene.splat(i));
    out.push_back(std::move(part));
  }
  return out;
}

namespace {

bool same_attributes(const core::SplatScene &a, std::size_t i, const core::SplatScene &b,
                     std::size_t j) {
  if (a.rotations()[i].coeffs() != b.rotations()[j].coeffs() ||
      a.scales()[i] != b.scales()[j] || a.opacities()[i] != b.opacities()[j])
    return false;
  const auto sa = a.sh_of(i), sb = b.sh_of(j);
  return std::equal(sa.begin(), sa.end(), sb.begin(), sb.end());
}

} // namespace

core::SplatScene merge_cells(std::span<const core::SplatScene> cell_scenes,
                             const PartitionPlan &plan) {
  if (cell_scenes.size() != plan.cells.size())
    throw InvalidInput("merge_cells got " + std::to_string(cell_scenes.size()) +
                       " scenes for " + std::to_string(plan.cells.size()) + " cells");
  for (std::size_t a = 0; a < plan.cells.size(); ++a)
    for (std::size_t b = a + 1; b < plan.cells.size(); ++b) {
      const Rect &ra = plan.cells[a].core_bounds, &rb = plan.cells[b].core_bounds;
      const double ox = std::min(ra.x1, rb.x1) - std::max(ra.x0, rb.x0);
      const double oy = std::min(ra.y1, rb.y1) - std::max(ra.y0, rb.y0);
      if (ox > 0.0 && oy > 0.0)
        throw ContractViolation("core bounds of cells " + std::to_string(a) + " and " +
                                std::to_string(b) + " overlap");
    }

  int degree = 0;
  for (const auto &s : cell_scenes)
    degree = std::max(degree, s.sh_degree());

  struct Ref {
    std::size_t scene, index;
  };
  std::vector<Ref> kept;
  for (std::size_t c = 0; c < cell_scenes.size(); ++c)
    for (std::size_t i = 0; i < cell_scenes[c].size(); ++i)
      if (plan.cells[c].core_contains(ground(cell_scenes[c].centers()[i])))
        kept.push_back({c, i});

  auto center = [&](const Ref &r) { return cell_scenes[r.scene].centers()[r.index]; };
  std::vector<std::size_t> by_x(kept.size());
  std::iota(by_x.begin(), by_x.end(), std::size_t{0});
  std::sort(by_x.begin(), by_x.end(), [&](std::size_t a, std::size_t b) {
    return center(kept[a]).x() < center(kept[b]).x() ||
           (center(kept[a]).x() == center(kept[b]).x() && a < b);
  });
  constexpr double kDuplicateTol = 1e-9;
  std::vector<char> duplicate(kept.size(), 0);
  for (std::size_t s = 0; s < by_x.size(); ++s) {
    const std::size_t a = by_x[s];
    if (duplicate[a])
      continue;
    for (std::size_t t = s + 1; t < by_x.size(); ++t) {
      const std::size_t b = by_x[t];
      if (center(kept[b]).x() - center(kept[a]).x() > kDuplicateTol)
        break;
      if (duplicate[b])
        continue;
      if ((center(kept[a]) - center(kept[b])).cwiseAbs().maxCoeff() <= kDuplicateTol &&
          same_attributes(cell_scenes[kept[a].scene], kept[a].index, cell_scenes[kept[b].scene],
                          kept[b].index))
        duplicate[std::max(a, b)] = 1;
    }
  }

  core::SplatScene merged(degree);
  if (!cell_scenes.empty())
    merged.crs_note = cell_scenes.front().crs_note;
  merged.reserve(kept.size());
  for (std::size_t k = 0; k < kept.size(); ++k)
    if (!duplicate[k])
      merged.push_back(cell_scenes[kept[k].scene].splat(kept[k].index));
  return merged;
}

std::string plan_manifest(const PartitionPlan &plan) {
  using nlohmann::ordered_json;
  auto rect = [](const Rect &r) { return ordered_json::array({r.x0, r.y0, r.x1, r.y1}); };
  ordered_json doc;
  doc["grid"] = {{"cols", plan.cols}, {"rows", plan.rows}};
  doc["expansion_ratio"] = plan.expansion_ratio;
  doc["visibility_threshold"] = plan.visibility_threshold;
  doc["z_range"] = ordered_json::array({plan.z_min, plan.z_max});
  ordered_json cells = ordered_json::array();
  for (const auto &cell : plan.cells) {
    ordered_json c;
    c["row"] = cell.row;
    c["col"] = cell.col;
    c["core_bounds"] = rect(cell.core_bounds);
    c["expanded_bounds"] = rect(cell.expanded_bounds);
    c["camera_ids"] = cell.camera_ids;
    c["selected_camera_ids"] = cell.selected_camera_ids;
    c["point_count"] = cell.point_indices.size();
    cells.push_back(std::move(c));
  }
  doc["cells"] = std::move(cells);
  doc["warnings"] = plan.warnings;
  return doc.dump(2) + "\n";
}

} // namespace orthosplat::partition
