#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "orthosplat/core.hpp"
#include "orthosplat/image.hpp"
#include "orthosplat/projection.hpp"
#include "orthosplat/rasterizer.hpp"

namespace orthosplat::tdom {

inline constexpr double kDefaultZMarginFraction = 0.05;

/// Pixel-to-ground affine in GDAL order: X = c[0] + col * c[1] + row * c[2],
/// Y = c[3] + col * c[4] + row * c[5], evaluated at pixel centers (col, row integer).
struct GeoTransform {
  std::array<double, 6> coeffs{0.0, 1.0, 0.0, 0.0, 0.0, -1.0};

  Eigen::Vector2d pixel_to_world(const Eigen::Vector2d &pixel) const;
  Eigen::Vector2d world_to_pixel(const Eigen::Vector2d &world) const;
  bool invertible() const;
  /// Six-line world file: A, D, B, E, C, F.
  std::string world_file() const;
};

struct TileRect {
  int row = 0, col = 0;
  raster::PixelWindow window;
};

struct TdomPlan {
  projection::OrthoCamera ortho_cam;
  double gsd = 0.0;
  int tile_rows = 1;
  int tile_cols = 1;
  int width = 0;
  int height = 0;
  /// World height of the camera plane; view depth = camera_z - world z.
  double camera_z = 0.0;

  std::vector<TileRect> tiles() const;
  GeoTransform geo_transform() const;
};

/// Nadir orthographic plan covering `scene_bounds` at `gsd` meters per pixel, north up.
TdomPlan plan_tdom(const core::Aabb &scene_bounds, double gsd, int tile_rows, int tile_cols,
                   double z_margin_fraction = kDefaultZMarginFraction);

/// Boundaries of `parts` near-equal integer spans of [0, total), larger spans first.
std::vector<int> split_span(int total, int parts);

struct TdomProduct {
  Image<double> color;            ///< linear RGB, 3 channels
  Image<double> depth_raw;        ///< sum of alpha_i T_i d_i
  Image<double> depth_normalized; ///< depth_raw / coverage, 0 where uncovered
  Image<double> coverage;         ///< accumulated alpha
  GeoTransform geo_transform;
  double gsd = 0.0;
};

struct TdomRenderOptions {
  Eigen::Vector3d background = Eigen::Vector3d::Ones();
  int threads = 0;
  /// Tiles rendered concurrently; each holds one framebuffer in memory.
  int max_tiles_in_flight = 1;
};

TdomProduct render_tdom(const core::SplatScene &scene, const TdomPlan &plan,
                        const TdomRenderOptions &options = {});

/// Writes color.png (sRGB 8-bit) + color.pgw, depth.pfm, depth_normalized.pfm,
/// depth_preview.png (16-bit, min-max), coverage.png and product.json into `dir`.
void export_products(const TdomProduct &product, const std::filesystem::path &dir);

struct LoadedProduct {
  ImageU8 color_srgb;
  Image<float> depth_raw;
  Image<float> depth_normalized;
  ImageU8 coverage;
  GeoTransform geo_transform;
  double gsd = 0.0;
};
LoadedProduct load_products(const std::filesystem::path &dir);

double linear_to_srgb(double linear);
std::uint8_t to_u8(double unit);

} // namespace orthosplat::tdom
