#pragma once

// Synthetic scenes shared by the unit tests and the acceptance runner.

#include <vector>

#include "orthosplat/fit.hpp"
#include "orthosplat/rasterizer.hpp"
#include "support.hpp"

namespace testing_support {

inline Image<double> to_image(const raster::FrameBuffer &fb) {
  Image<double> img(fb.width, fb.height, 3);
  for (int y = 0; y < fb.height; ++y)
    for (int x = 0; x < fb.width; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(x, y, c) = fb.color[fb.index(x, y)][c];
  return img;
}

struct FitFixture {
  core::SplatScene truth;
  core::SplatScene init;
  std::vector<fit::View> views;
  fit::FitConfig config;
};

/// Nadir ortho view of a 4 m x 4 m patch at 0.125 m per pixel.
inline projection::OrthoCamera fixture_camera() {
  return ortho(-2, 2, -2, 2, 0, 20, 32, 32, nadir_pose({0, 0, 10}));
}

/// Four overlapping flat splats; the initial scene differs only in color.
inline FitFixture color_fixture(std::uint64_t seed = 7) {
  Rng rng(seed);
  FitFixture f;
  const Eigen::Vector3d centers[4] = {{-0.7, -0.6, 0.0}, {0.6, -0.5, 0.1}, {-0.5, 0.7, 0.2}, {0.6, 0.6, 0.3}};
  for (const auto &c : centers) {
    const Eigen::Vector3d rgb(uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9));
    const core::Splat2D s(c, Eigen::Quaterniond(Eigen::AngleAxisd(uniform(rng, 0, 3), Eigen::Vector3d::UnitZ())),
                          {uniform(rng, 0.5, 0.8), uniform(rng, 0.4, 0.7)}, uniform(rng, 0.6, 0.85),
                          core::ShCoeffs::from_rgb(rgb));
    f.truth.push_back(s);
    core::Splat2D p = s;
    const Eigen::Vector3d shifted =
        (rgb + Eigen::Vector3d(uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3)))
            .cwiseMax(0.05)
            .cwiseMin(0.95);
    p.sh = core::ShCoeffs::from_rgb(shifted);
    f.init.push_back(p);
  }
  const projection::Camera cam = fixture_camera();
  f.views.push_back({cam, to_image(raster::render(f.truth, cam))});
  f.config.iterations = 200;
  f.config.groups = {fit::ParamGroup::Color};
  f.config.learning_rates.color = 0.05;
  return f;
}

/// Ten splats perturbed in position (up to 0.5 m per axis in the ground plane) and color.
inline FitFixture position_color_fixture(std::uint64_t seed = 11) {
  Rng rng(seed);
  FitFixture f;
  for (int i = 0; i < 10; ++i) {
    const Eigen::Vector3d c(uniform(rng, -1.3, 1.3), uniform(rng, -1.3, 1.3), uniform(rng, 0, 1));
    const Eigen::Vector3d rgb(uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9));
    const core::Splat2D s(c, Eigen::Quaterniond(Eigen::AngleAxisd(uniform(rng, 0, 3), Eigen::Vector3d::UnitZ())),
                          {uniform(rng, 0.35, 0.6), uniform(rng, 0.35, 0.6)}, uniform(rng, 0.6, 0.85),
                          core::ShCoeffs::from_rgb(rgb));
    f.truth.push_back(s);
    core::Splat2D p = s;
    const double r = uniform(rng, 0, 0.5), a = uniform(rng, -3.14159, 3.14159);
    p.center += Eigen::Vector3d(r * std::cos(a), r * std::sin(a), 0);
    p.sh = core::ShCoeffs::from_rgb(
        (rgb + Eigen::Vector3d(uniform(rng, -0.2, 0.2), uniform(rng, -0.2, 0.2), uniform(rng, -0.2, 0.2)))
            .cwiseMax(0.05)
            .cwiseMin(0.95));
    f.init.push_back(p);
  }
  const projection::Camera cam = fixture_camera();
  f.views.push_back({cam, to_image(raster::render(f.truth, cam))});
  f.config.iterations = 500;
  f.config.groups = {fit::ParamGroup::Position, fit::ParamGroup::Color};
  f.config.learning_rates.position = 0.01;
  f.config.learning_rates.color = 0.05;
  return f;
}

} // namespace testing_support
