#include "orthosplat/projection.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "orthosplat/error.hpp"

namespace orthosplat::projection {

void Pose::validate(double tol) const {
  if (!linear.allFinite() || !translation.allFinite())
    throw InvalidInput("pose has non-finite entries");
  const double err = (linear.transpose() * linear - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (err > tol)
    throw InvalidInput("pose rotation is not orthonormal (max |R^T R - I| = " +
                       std::to_string(err) + ")");
}

double PerspectiveCamera::right() const { return z_near * std::tan(0.5 * fov_x); }
double PerspectiveCamera::top() const { return z_near * std::tan(0.5 * fov_y); }

void PerspectiveCamera::validate() const {
  pose.validate();
  if (!(z_near > 0.0 && z_near < z_far))
    throw InvalidInput("perspective camera needs 0 < z_near < z_far");
  for (double fov : {fov_x, fov_y})
    if (!(fov > 0.0 && fov < std::numbers::pi))
      throw InvalidInput("perspective field of view must lie in (0, pi)");
  if (width < 1 || height < 1)
    throw InvalidInput("camera image must be at least 1x1");
}

void OrthoCamera::validate() const {
  pose.validate();
  if (!(left < right && bottom < top && z_near < z_far))
    throw InvalidInput("orthographic box has zero or negative extent");
  if (width < 1 || height < 1)
    throw InvalidInput("camera image must be at least 1x1");
}

const Pose &pose_of(const Camera &cam) {
  return std::visit([](const auto &c) -> const Pose & { return c.pose; }, cam);
}
int width_of(const Camera &cam) {
  return std::visit([](const auto &c) { return c.width; }, cam);
}
int height_of(const Camera &cam) {
  return std::visit([](const auto &c) { return c.height; }, cam);
}
double near_of(const Camera &cam) {
  return std::visit([](const auto &c) { return c.z_near; }, cam);
}
double far_of(const Camera &cam) {
  return std::visit([](const auto &c) { return c.z_far; }, cam);
}

ViewSplat ViewSplat::from(const Eigen::Vector3d &center, const Eigen::Quaterniond &rotation,
                          const Eigen::Vector2d &scales, const Pose &pose) {
  const Eigen::Matrix3d r = core::rotation_matrix(rotation);
  ViewSplat v;
  v.center = pose.to_view(center);
  v.tangent_u = pose.rotate_to_view(r.col(0));
  v.tangent_v = pose.rotate_to_view(r.col(1));
  v.normal = pose.rotate_to_view(r.col(2));
  v.scale_u = scales.x();
  v.scale_v = scales.y();
  return v;
}

ViewSplat ViewSplat::from(const core::Splat2D &splat, const Pose &pose) {
  return from(splat.center, splat.rotation, splat.scales, pose);
}

Eigen::Matrix4d perspective_matrix(const PerspectiveCamera &cam) {
  cam.validate();
  const double n = cam.z_near, f = cam.z_far;
  const double r = cam.right(), l = -r;
  const double t = cam.top(), b = -t;
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  m(0, 0) = 2.0 * n / (r - l);
  m(0, 2) = -(r + l) / (r - l);
  m(1, 1) = -2.0 * n / (t - b);
  m(1, 2) = (t + b) / (t - b);
  m(2, 2) = (f + n) / (f - n);
  m(2, 3) = -2.0 * f * n / (f - n);
  m(3, 2) = 1.0;
  return m;
}

Eigen::Matrix4d ortho_matrix(const OrthoCamera &cam) {
  cam.validate();
  const double l = cam.left, r = cam.right, b = cam.bottom, t = cam.top;
  const double n = cam.z_near, f = cam.z_far;
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  m(0, 0) = 2.0 / (r - l);
  m(0, 3) = -(r + l) / (r - l);
  // y = t lands on NDC -1, which the viewport maps to row 0.
  m(1, 1) = -2.0 / (t - b);
  m(1, 3) = (t + b) / (t - b);
  m(2, 2) = 2.0 / (f - n);
  m(2, 3) = -(f + n) / (f - n);
  m(3, 3) = 1.0;
  return m;
}

Eigen::Vector2d ndc_to_pixel(const Eigen::Vector2d &ndc, int width, int height) {
  return {0.5 * (ndc.x() + 1.0) * width, 0.5 * (ndc.y() + 1.0) * height};
}

namespace {

void check_pixel(int px, int py, int width, int height) {
  if (px < 0 || py < 0 || px >= width || py >= height)
    throw InvalidInput("pixel (" + std::to_string(px) + ", " + std::to_string(py) +
                       ") outside " + std::to_string(width) + "x" + std::to_string(height) +
                       " image");
}

} // namespace

Ray ortho_ray(int px, int py, const OrthoCamera &cam) {
  check_pixel(px, py, cam.width, cam.height);
  Ray ray;
  ray.origin = {cam.left + (px + 0.5) * cam.gsd_x(), cam.top - (py + 0.5) * cam.gsd_y(), 0.0};
  ray.direction = Eigen::Vector3d::UnitZ();
  return ray;
}

Ray perspective_ray(int px, int py, const PerspectiveCamera &cam) {
  check_pixel(px, py, cam.width, cam.height);
  const double r = cam.right(), t = cam.top();
  const double x = -r + (px + 0.5) * (2.0 * r / cam.width);
  const double y = t - (py + 0.5) * (2.0 * t / cam.height);
  Ray ray;
  ray.origin = Eigen::Vector3d::Zero();
  ray.direction = Eigen::Vector3d(x, y, cam.z_near).normalized();
  return ray;
}

Ray pixel_ray(int px, int py, const Camera &cam) {
  if (const auto *o = std::get_if<OrthoCamera>(&cam))
    return ortho_ray(px, py, *o);
  return perspective_ray(px, py, std::get<PerspectiveCamera>(cam));
}

std::optional<SplatIntersection> ray_splat_intersect(const Ray &ray, const ViewSplat &splat,
                                                     DepthRange range) {
  const double denom = splat.normal.dot(ray.direction);
  SplatIntersection hit;
  if (std::abs(denom) < kEdgeOnTolerance) {
    hit.degenerate = true;
    hit.view_depth = splat.center.z();
  } else {
    const double tau = splat.normal.dot(splat.center - ray.origin) / denom;
    const Eigen::Vector3d p = ray.origin + tau * ray.direction;
    const Eigen::Vector3d d = p - splat.center;
    hit.uv = {splat.tangent_u.dot(d) / splat.scale_u, splat.tangent_v.dot(d) / splat.scale_v};
    hit.view_depth = p.z();
    hit.gaussian_value = core::gaussian_uv(hit.uv.x(), hit.uv.y());
  }
  if (!(hit.view_depth >= range.near && hit.view_depth <= range.far))
    return std::nullopt;
  return hit;
}

std::optional<SplatIntersection> ray_splat_intersect(const Ray &ray, const core::Splat2D &splat,
                                                     const Pose &world_to_view,
                                                     DepthRange range) {
  return ray_splat_intersect(ray, ViewSplat::from(splat, world_to_view), range);
}

ProjectedPoint project_point(const Eigen::Vector3d &world, const Camera &cam) {
  const Pose &pose = pose_of(cam);
  const Eigen::Vector3d view = pose.to_view(world);
  const Eigen::Matrix4d m = std::visit(
      [](const auto &c) -> Eigen::Matrix4d {
        if constexpr (std::is_same_v<std::decay_t<decltype(c)>, OrthoCamera>)
          return ortho_matrix(c);
        else
          return perspective_matrix(c);
      },
      cam);
  const Eigen::Vector4d clip = m * view.homogeneous();
  ProjectedPoint out;
  out.view_depth = view.z();
  if (!(clip.w() > 0.0))
    return out;
  const Eigen::Vector3d ndc = clip.head<3>() / clip.w();
  out.pixel = ndc_to_pixel(ndc.head<2>(), width_of(cam), height_of(cam));
  out.in_view = (ndc.array().abs() <= 1.0).all();
  return out;
}

} // namespace orthosplat::projection
