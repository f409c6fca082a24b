#include "orthosplat/tdom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "orthosplat/error.hpp"
#include "orthosplat/parallel.hpp"
#include "orthosplat/raster_io.hpp"

namespace orthosplat::tdom {

Eigen::Vector2d GeoTransform::pixel_to_world(const Eigen::Vector2d &p) const {
  const auto &c = coeffs;
  return {c[0] + p.x() * c[1] + p.y() * c[2], c[3] + p.x() * c[4] + p.y() * c[5]};
}

Eigen::Vector2d GeoTransform::world_to_pixel(const Eigen::Vector2d &w) const {
  const auto &c = coeffs;
  Eigen::Matrix2d a;
  a << c[1], c[2], c[4], c[5];
  return a.inverse() * Eigen::Vector2d(w.x() - c[0], w.y() - c[3]);
}

bool GeoTransform::invertible() const {
  return std::abs(coeffs[1] * coeffs[5] - coeffs[2] * coeffs[4]) > 0.0;
}

std::string GeoTransform::world_file() const {
  std::ostringstream out;
  out << std::setprecision(17);
  out << coeffs[1] << '\n'
      << coeffs[4] << '\n'
      << coeffs[2] << '\n'
      << coeffs[5] << '\n'
      << coeffs[0] << '\n'
      << coeffs[3] << '\n';
  return out.str();
}

std::vector<int> split_span(int total, int parts) {
  if (parts < 1)
    throw InvalidInput("tile count must be at least 1");
  std::vector<int> edges{0};
  for (int i = 0; i < parts; ++i)
    edges.push_back(edges.back() + total / parts + (i < total % parts ? 1 : 0));
  return edges;
}

std::vector<TileRect> TdomPlan::tiles() const {
  const auto xs = split_span(width, tile_cols);
  const auto ys = split_span(height, tile_rows);
  std::vector<TileRect> out;
  for (int r = 0; r < tile_rows; ++r)
    for (int c = 0; c < tile_cols; ++c)
      out.push_back({r, c, {xs[c], ys[r], xs[c + 1] - xs[c], ys[r + 1] - ys[r]}});
  return out;
}

GeoTransform TdomPlan::geo_transform() const {
  const double gx = ortho_cam.gsd_x(), gy = ortho_cam.gsd_y();
  // View x = world x and view y = world y for the nadir pose.
  return GeoTransform{{ortho_cam.left + 0.5 * gx, gx, 0.0, ortho_cam.top - 0.5 * gy, 0.0, -gy}};
}

TdomPlan plan_tdom(const core::Aabb &bounds, double gsd, int tile_rows, int tile_cols,
                   double z_margin_fraction) {
  if (!(gsd > 0.0) || !std::isfinite(gsd))
    throw InvalidInput("gsd must be positive");
  if (tile_rows < 1 || tile_cols < 1)
    throw InvalidInput("tile grid must be at least 1x1");
  if (bounds.empty() || !bounds.min.allFinite() || !bounds.max.allFinite())
    throw InvalidInput("scene bounds are empty");

  // Tolerate representation error so exact multiples of gsd do not gain a pixel.
  auto pixels = [&](double extent) {
    const double n = extent / gsd;
    return std::max(1, static_cast<int>(std::ceil(n - 1e-9 * std::max(1.0, n))));
  };
  TdomPlan plan;
  plan.gsd = gsd;
  plan.tile_rows = tile_rows;
  plan.tile_cols = tile_cols;
  plan.width = pixels(bounds.max.x() - bounds.min.x());
  plan.height = pixels(bounds.max.y() - bounds.min.y());
  if (tile_cols > plan.width || tile_rows > plan.height)
    throw InvalidInput("more tiles than pixels along an axis");

  const double z_extent = bounds.max.z() - bounds.min.z();
  const double margin = std::max(z_margin_fraction * z_extent, gsd);
  plan.camera_z = bounds.max.z() + margin;

  auto &cam = plan.ortho_cam;
  cam.pose.linear = Eigen::Vector3d(1.0, 1.0, -1.0).asDiagonal();
  cam.pose.translation = {0.0, 0.0, plan.camera_z};
  cam.left = bounds.min.x();
  cam.right = bounds.min.x() + plan.width * gsd;
  cam.top = bounds.max.y();
  cam.bottom = bounds.max.y() - plan.height * gsd;
  cam.z_near = 0.0;
  cam.z_far = plan.camera_z - (bounds.min.z() - margin);
  cam.width = plan.width;
  cam.height = plan.height;
  cam.validate();
  return plan;
}

TdomProduct render_tdom(const core::SplatScene &scene, const TdomPlan &plan,
                        const TdomRenderOptions &options) {
  TdomProduct product;
  product.gsd = plan.gsd;
  product.geo_transform = plan.geo_transform();
  product.color = Image<double>(plan.width, plan.height, 3);
  product.depth_raw = Image<double>(plan.width, plan.height);
  product.depth_normalized = Image<double>(plan.width, plan.height);
  product.coverage = Image<double>(plan.width, plan.height);

  const auto tiles = plan.tiles();
  const int in_flight = std::clamp(options.max_tiles_in_flight, 1, static_cast<int>(tiles.size()));
  const int total_threads = resolve_threads(options.threads);
  const int per_tile_threads = std::max(1, total_threads / in_flight);

  for (std::size_t batch = 0; batch < tiles.size(); batch += in_flight) {
    const std::size_t batch_end = std::min(tiles.size(), batch + in_flight);
    parallel_for(batch_end - batch, in_flight, [&](std::size_t j) {
      const TileRect &tile = tiles[batch + j];
      raster::RenderOptions ro;
      ro.background = options.background;
      ro.threads = per_tile_threads;
      ro.window = tile.window;
      const auto fb = raster::render(scene, plan.ortho_cam, ro);
      for (int y = 0; y < fb.height; ++y)
        for (int x = 0; x < fb.width; ++x) {
          const std::size_t i = fb.index(x, y);
          const int gx = tile.window.x0 + x, gy = tile.window.y0 + y;
          for (int c = 0; c < 3; ++c)
            product.color.at(gx, gy, c) = fb.color[i][c];
          product.depth_raw.at(gx, gy) = fb.depth[i];
          product.depth_normalized.at(gx, gy) = fb.normalized_depth(i);
          product.coverage.at(gx, gy) = fb.accum_alpha[i];
        }
    });
  }
  return product;
}

double linear_to_srgb(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

std::uint8_t to_u8(double unit) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(unit, 0.0, 1.0) * 255.0));
}

namespace {

Image<float> to_float(const Image<double> &img) {
  Image<float> out(img.width(), img.height(), img.channels());
  std::transform(img.data().begin(), img.data().end(), out.data().begin(),
                 [](double v) { return static_cast<float>(v); });
  return out;
}

void write_text(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path);
  if (!out || !(out << text))
    throw IoError("cannot write '" + path.string() + "'");
}

} // namespace

void export_products(const TdomProduct &product, const std::filesystem::path &dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  const int w = product.color.width(), h = product.color.height();

  ImageU8 color(w, h, 3);
  for (std::size_t i = 0; i < color.data().size(); ++i)
    color.data()[i] = to_u8(linear_to_srgb(product.color.data()[i]));
  io::write_png(dir / "color.png", color);
  write_text(dir / "color.pgw", product.geo_transform.world_file());

  io::write_pfm(dir / "depth.pfm", to_float(product.depth_raw));
  io::write_pfm(dir / "depth_normalized.pfm", to_float(product.depth_normalized));

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < product.depth_normalized.data().size(); ++i)
    if (product.coverage.data()[i] > raster::kNormalizedDepthMinCoverage) {
      lo = std::min(lo, product.depth_normalized.data()[i]);
      hi = std::max(hi, product.depth_normalized.data()[i]);
    }
  ImageU16 preview(w, h);
  for (std::size_t i = 0; i < preview.data().size(); ++i) {
    if (!(product.coverage.data()[i] > raster::kNormalizedDepthMinCoverage) || !(hi > lo))
      continue;
    const double t = (product.depth_normalized.data()[i] - lo) / (hi - lo);
    preview.data()[i] = static_cast<std::uint16_t>(std::lround(std::clamp(t, 0.0, 1.0) * 65535.0));
  }
  io::write_png16(dir / "depth_preview.png", preview);

  ImageU8 coverage(w, h);
  for (std::size_t i = 0; i < coverage.data().size(); ++i)
    coverage.data()[i] = to_u8(product.coverage.data()[i]);
  io::write_png(dir / "coverage.png", coverage);

  nlohmann::ordered_json meta;
  meta["width"] = w;
  meta["height"] = h;
  meta["gsd"] = product.gsd;
  meta["geo_transform"] = product.geo_transform.coeffs;
  meta["depth_preview_range"] = {std::isfinite(lo) ? lo : 0.0, std::isfinite(hi) ? hi : 0.0};
  meta["files"] = {{"color", "color.png"},
                   {"world_file", "color.pgw"},
                   {"depth", "depth.pfm"},
                   {"depth_normalized", "depth_normalized.pfm"},
                   {"depth_preview", "depth_preview.png"},
                   {"coverage", "coverage.png"}};
  write_text(dir / "product.json", meta.dump(2) + "\n");
}

LoadedProduct load_products(const std::filesystem::path &dir) {
  std::ifstream in(dir / "product.json");
  if (!in)
    throw IoError("cannot open '" + (dir / "product.json").string() + "'");
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception &e) {
    throw SchemaError("'" + (dir / "product.json").string() + "': " + e.what());
  }
  LoadedProduct p;
  p.gsd = meta.at("gsd").get<double>();
  p.geo_transform.coeffs = meta.at("geo_transform").get<std::array<double, 6>>();
  p.color_srgb = io::read_png(dir / "color.png");
  p.depth_raw = io::read_pfm(dir / "depth.pfm");
  p.depth_normalized = io::read_pfm(dir / "depth_normalized.pfm");
  p.coverage = io::read_png(dir / "coverage.png");
  return p;
}

} // namespace orthosplat::tdom
