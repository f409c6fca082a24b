#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "orthosplat/core.hpp"
#include "orthosplat/projection.hpp"

namespace orthosplat::raster {

inline constexpr double kAlphaClamp = 0.999;
inline constexpr double kMinFragmentAlpha = 1.0 / 255.0;

/// Screen-space fallback Gaussian sigma in pixels.
inline constexpr double kScreenSigma = 0.70710678118654752;
/// Ray Gaussian support radius in splat-local units, and fallback support in pixels.
inline constexpr double kSupportRadius = 3.0;
inline constexpr double kScreenSupportPx = 3.0;
inline constexpr int kWorkTileSize = 16;
/// Minimum coverage for the alpha-normalized depth channel.
inline constexpr double kNormalizedDepthMinCoverage = 0.01;

struct FrameBuffer {
  int width = 0;
  int height = 0;
  std::vector<Eigen::Vector3d> color;
  /// Raw expected termination depth, sum of alpha_i T_i d_i.
  std::vector<double> depth;
  std::vector<double> accum_alpha;
  Eigen::Vector3d background = Eigen::Vector3d::Ones();

  FrameBuffer() = default;
  FrameBuffer(int width, int height, const Eigen::Vector3d &background);

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  /// depth / accum_alpha where coverage exceeds kNormalizedDepthMinCoverage, else 0.
  double normalized_depth(std::size_t i) const;
};

struct Fragment {
  std::size_t splat_index = 0;
  double alpha = 0.0;
  double depth = 0.0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  /// max(G_ray, g_screen) before opacity and clamping.
  double weight = 0.0;
  bool clamped = false;
  bool center_depth = false;
};

struct PixelComposite {
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  double depth = 0.0;
  double accum_alpha = 0.0;
};

/// Front-to-back accumulator shared by composite_pixel and render so both produce identical
/// bits for the same fragment sequence.
struct Compositor {
  double transmittance = 1.0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  double depth = 0.0;

  void add(double alpha, const Eigen::Vector3d &c, double d) {
    const double w = alpha * transmittance;
    color += w * c;
    depth += w * d;
    transmittance *= 1.0 - alpha;
  }
  PixelComposite finish(const Eigen::Vector3d &background) const {
    return {color + transmittance * background, depth, 1.0 - transmittance};
  }
};

/// Splat indices by ascending view-space center depth, ties by index.
std::vector<std::size_t> sort_splats(const core::SplatScene &scene,
                                     const projection::Camera &camera);

/// Direction used for SH color: the view axis for ortho cameras, camera-to-center otherwise.
Eigen::Vector3d sh_direction(const Eigen::Vector3d &center, const projection::Camera &camera);

/// Screen-space fallback Gaussian for a pixel offset (pixels) from the projected center.
double screen_gaussian(const Eigen::Vector2d &offset_px);

struct SplatWeight {
  double alpha = 0.0;
  double ray_gaussian = 0.0;
  double screen_gaussian = 0.0;
  /// g_screen > G_ray: the fragment takes the splat center's depth.
  bool center_depth = false;
  bool clamped = false;
};

/// Effective opacity alpha * max(G_ray, g_screen) clamped to [0, kAlphaClamp].
SplatWeight splat_alpha(const projection::SplatIntersection &hit, double opacity,
                        const Eigen::Vector2d &screen_offset_px);

/// Front-to-back blend of depth-ordered fragments. Throws ContractViolation when
/// `check_order` is set and fragment depths decrease.
PixelComposite composite_pixel(std::span<const Fragment> fragments,
                               const Eigen::Vector3d &background, bool check_order = true);

struct PixelWindow {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;
};

struct RenderOptions {
  Eigen::Vector3d background = Eigen::Vector3d::Ones();
  int threads = 1;
  /// Sub-rectangle of the camera image to render; the whole image when unset.
  std::optional<PixelWindow> window;
};

/// Per-camera splat data in compositing order.
class PreparedScene {
public:
  PreparedScene(const core::SplatScene &scene, const projection::Camera &camera);

  std::size_t size() const { return order_.size(); }
  const std::vector<std::size_t> &order() const { return order_; }
  const projection::Camera &camera() const { return camera_; }
  const Eigen::Vector3d &color(std::size_t k) const { return color_[k]; }

  /// Fragment of the splat at compositing position `k` for pixel (px, py), if any.
  std::optional<Fragment> fragment(std::size_t k, int px, int py,
                                   const projection::Ray &ray) const;
  /// All fragments of pixel (px, py) in compositing order.
  void fragments_at(int px, int py, std::vector<Fragment> &out) const;

  /// Conservative pixel bounding box of a splat's support, inclusive; empty when x1 < x0.
  struct PixelBox {
    int x0, y0, x1, y1;
  };
  const PixelBox &pixel_box(std::size_t k) const { return boxes_[k]; }

private:
  projection::Camera camera_;
  projection::DepthRange range_;
  std::vector<std::size_t> order_;
  std::vector<projection::ViewSplat> view_;
  std::vector<Eigen::Vector2d> screen_center_;
  std::vector<char> has_screen_center_;
  std::vector<Eigen::Vector3d> color_;
  std::vector<double> opacity_;
  std::vector<PixelBox> boxes_;
};

FrameBuffer render(const core::SplatScene &scene, const projection::Camera &camera,
                   const RenderOptions &options = {});

} // namespace orthosplat::raster
