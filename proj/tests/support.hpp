#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "orthosplat/core.hpp"
#include "orthosplat/projection.hpp"

namespace testing_support {

using namespace orthosplat;

using Rng = std::mt19937_64;

inline double uniform(Rng &rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Eigen::Quaterniond random_quaternion(Rng &rng) {
  std::normal_distribution<double> n;
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q;
}

inline Eigen::Vector3d random_point(Rng &rng, const Eigen::Vector3d &lo, const Eigen::Vector3d &hi) {
  return {uniform(rng, lo.x(), hi.x()), uniform(rng, lo.y(), hi.y()), uniform(rng, lo.z(), hi.z())};
}

/// Rotation whose normal t_w stays within `tilt` radians of +z.
inline Eigen::Quaterniond random_tilted(Rng &rng, double tilt) {
  const double yaw = uniform(rng, -std::numbers::pi, std::numbers::pi);
  const double t = uniform(rng, 0.0, tilt);
  const double az = uniform(rng, -std::numbers::pi, std::numbers::pi);
  return Eigen::Quaterniond(Eigen::AngleAxisd(t, Eigen::Vector3d(std::cos(az), std::sin(az), 0)) *
                            Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()));
}

inline core::Splat2D random_splat(Rng &rng, const Eigen::Vector3d &lo, const Eigen::Vector3d &hi,
                                  double smin, double smax, double tilt = 0.6) {
  const Eigen::Vector3d rgb(uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1));
  return core::Splat2D(random_point(rng, lo, hi), random_tilted(rng, tilt),
                       {uniform(rng, smin, smax), uniform(rng, smin, smax)},
                       uniform(rng, 0.3, 1.0), core::ShCoeffs::from_rgb(rgb));
}

inline core::SplatScene random_scene(Rng &rng, std::size_t n, const Eigen::Vector3d &lo,
                                     const Eigen::Vector3d &hi, double smin, double smax) {
  core::SplatScene scene(0);
  for (std::size_t i = 0; i < n; ++i)
    scene.push_back(random_splat(rng, lo, hi, smin, smax));
  return scene;
}

/// World-to-view pose of a nadir camera at (x, y, z): view x = east, view y = north,
/// view z = down.
inline projection::Pose nadir_pose(const Eigen::Vector3d &position) {
  projection::Pose p;
  p.linear = Eigen::Vector3d(1.0, 1.0, -1.0).asDiagonal();
  p.translation = -p.linear * position;
  return p;
}

inline projection::OrthoCamera ortho(double l, double r, double b, double t, double zn, double zf,
                                     int w, int h, const projection::Pose &pose = {}) {
  projection::OrthoCamera c;
  c.pose = pose;
  c.left = l;
  c.right = r;
  c.bottom = b;
  c.top = t;
  c.z_near = zn;
  c.z_far = zf;
  c.width = w;
  c.height = h;
  return c;
}

inline projection::PerspectiveCamera perspective(double fov_x, double fov_y, double zn, double zf,
                                                 int w, int h,
                                                 const projection::Pose &pose = {}) {
  projection::PerspectiveCamera c;
  c.pose = pose;
  c.fov_x = fov_x;
  c.fov_y = fov_y;
  c.z_near = zn;
  c.z_far = zf;
  c.width = w;
  c.height = h;
  return c;
}

/// Uniformly random rigid pose (proper rotation) with translation in a cube.
inline projection::Pose random_pose(Rng &rng, double extent) {
  projection::Pose p;
  p.linear = random_quaternion(rng).toRotationMatrix();
  p.translation = random_point(rng, Eigen::Vector3d::Constant(-extent),
                               Eigen::Vector3d::Constant(extent));
  return p;
}

} // namespace testing_support
