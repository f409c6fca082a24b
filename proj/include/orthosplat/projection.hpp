#pragma once

#include <limits>
#include <optional>
#include <variant>

#include <Eigen/Core>

#include "orthosplat/core.hpp"

namespace orthosplat::projection {

/// World-to-view map x_view = linear * x_world + translation. `linear` is orthonormal; it may
/// be improper because the view frame is image-oriented (x to the right, y up the image, z
/// along the optical axis).
struct Pose {
  Eigen::Matrix3d linear = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }

  Eigen::Vector3d to_view(const Eigen::Vector3d &world) const {
    return linear * world + translation;
  }
  Eigen::Vector3d to_world(const Eigen::Vector3d &view) const {
    return linear.transpose() * (view - translation);
  }
  Eigen::Vector3d rotate_to_view(const Eigen::Vector3d &dir) const { return linear * dir; }
  /// Optical center in world coordinates.
  Eigen::Vector3d center() const { return -linear.transpose() * translation; }
  /// Optical axis (+z view) in world coordinates.
  Eigen::Vector3d forward() const { return linear.row(2).transpose(); }

  /// Throws InvalidInput unless `linear` is orthonormal within `tol`.
  void validate(double tol = 1e-6) const;
};

struct PerspectiveCamera {
  Pose pose;
  double z_near = 0.01;
  double z_far = 1000.0;
  double fov_x = 1.0;
  double fov_y = 1.0;
  int width = 1;
  int height = 1;

  /// Half extents of the near plane (r = z_n tan(fov_x / 2), t = z_n tan(fov_y / 2)).
  double right() const;
  double top() const;
  void validate() const;
};

/// Orthographic view box in view-space meters. Columns advance with +x, rows with -y.
struct OrthoCamera {
  Pose pose;
  double left = -1.0;
  double right = 1.0;
  double bottom = -1.0;
  double top = 1.0;
  double z_near = 0.0;
  double z_far = 1.0;
  int width = 1;
  int height = 1;

  double gsd_x() const { return (right - left) / width; }
  double gsd_y() const { return (top - bottom) / height; }
  void validate() const;
};

using Camera = std::variant<OrthoCamera, PerspectiveCamera>;

const Pose &pose_of(const Camera &cam);
int width_of(const Camera &cam);
int height_of(const Camera &cam);
double near_of(const Camera &cam);
double far_of(const Camera &cam);

struct Ray {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d direction = Eigen::Vector3d::UnitZ();
};

struct SplatIntersection {
  Eigen::Vector2d uv = Eigen::Vector2d::Zero();
  /// View-space z of the hit; the splat center's z when degenerate.
  double view_depth = 0.0;
  /// Ray Gaussian in [0, 1]; zero for degenerate (edge-on) hits.
  double gaussian_value = 0.0;
  bool degenerate = false;
};

struct DepthRange {
  double near = -std::numeric_limits<double>::infinity();
  double far = std::numeric_limits<double>::infinity();
};

/// Edge-on threshold on |t_w . ray direction|.
inline constexpr double kEdgeOnTolerance = 1e-6;

/// A splat expressed in view space.
struct ViewSplat {
  Eigen::Vector3d center;
  Eigen::Vector3d tangent_u;
  Eigen::Vector3d tangent_v;
  Eigen::Vector3d normal;
  double scale_u = 1.0;
  double scale_v = 1.0;

  static ViewSplat from(const core::Splat2D &splat, const Pose &pose);
  static ViewSplat from(const Eigen::Vector3d &center, const Eigen::Quaterniond &rotation,
                        const Eigen::Vector2d &scales, const Pose &pose);
};

Eigen::Matrix4d perspective_matrix(const PerspectiveCamera &cam);
Eigen::Matrix4d ortho_matrix(const OrthoCamera &cam);

/// NDC [-1, 1] to continuous pixel coordinates; pixel (i, j) covers [i, i+1) x [j, j+1).
Eigen::Vector2d ndc_to_pixel(const Eigen::Vector2d &ndc, int width, int height);

/// Ray through the center of integer pixel (px, py). Origin lies on the view z = 0 plane.
Ray ortho_ray(int px, int py, const OrthoCamera &cam);
/// Ray from the optical center through the center of pixel (px, py).
Ray perspective_ray(int px, int py, const PerspectiveCamera &cam);
Ray pixel_ray(int px, int py, const Camera &cam);

std::optional<SplatIntersection> ray_splat_intersect(const Ray &ray, const ViewSplat &splat,
                                                     DepthRange range = {});
std::optional<SplatIntersection> ray_splat_intersect(const Ray &ray, const core::Splat2D &splat,
                                                     const Pose &world_to_view,
                                                     DepthRange range = {});

struct ProjectedPoint {
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  double view_depth = 0.0;
  bool in_view = false;
};

/// Projects a world point through M * W and the viewport.
ProjectedPoint project_point(const Eigen::Vector3d &world, const Camera &cam);
inline ProjectedPoint project_center(const core::Splat2D &splat, const Camera &cam) {
  return project_point(splat.center, cam);
}

} // namespace orthosplat::projection
