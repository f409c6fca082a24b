#include "orthosplat/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "orthosplat/error.hpp"
#include "orthosplat/parallel.hpp"

namespace orthosplat::raster {

using projection::Camera;
using projection::OrthoCamera;
using projection::PerspectiveCamera;

FrameBuffer::FrameBuffer(int width_, int height_, const Eigen::Vector3d &background_)
    : width(width_), height(height_),
      color(static_cast<std::size_t>(width_) * height_, background_),
      depth(static_cast<std::size_t>(width_) * height_, 0.0),
      accum_alpha(static_cast<std::size_t>(width_) * height_, 0.0), background(background_) {}

double FrameBuffer::normalized_depth(std::size_t i) const {
  return accum_alpha[i] > kNormalizedDepthMinCoverage ? depth[i] / accum_alpha[i] : 0.0;
}

std::vector<std::size_t> sort_splats(const core::SplatScene &scene, const Camera &camera) {
  const auto &pose = projection::pose_of(camera);
  std::vector<double> z(scene.size());
  for (std::size_t i = 0; i < scene.size(); ++i)
    z[i] = pose.to_view(scene.centers()[i]).z();
  std::vector<std::size_t> order(scene.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });
  return order;
}

Eigen::Vector3d sh_direction(const Eigen::Vector3d &center, const Camera &camera) {
  const projection::Pose &pose = projection::pose_of(camera);
  const Eigen::Vector3d forward = pose.forward();
  if (std::holds_alternative<OrthoCamera>(camera))
    return forward;
  const Eigen::Vector3d dir = (center - pose.center()).normalized();
  return dir.allFinite() ? dir : forward;
}

double screen_gaussian(const Eigen::Vector2d &offset_px) {
  const double d2 = offset_px.squaredNorm();
  if (d2 > kScreenSupportPx * kScreenSupportPx)
    return 0.0;
  return std::exp(-0.5 * d2 / (kScreenSigma * kScreenSigma));
}

SplatWeight splat_alpha(const projection::SplatIntersection &hit, double opacity,
                        const Eigen::Vector2d &screen_offset_px) {
  SplatWeight w;
  if (!hit.degenerate && hit.uv.squaredNorm() <= kSupportRadius * kSupportRadius)
    w.ray_gaussian = hit.gaussian_value;
  w.screen_gaussian = screen_gaussian(screen_offset_px);
  w.center_depth = w.screen_gaussian > w.ray_gaussian;
  const double a = opacity * std::max(w.ray_gaussian, w.screen_gaussian);
  w.clamped = a > kAlphaClamp;
  w.alpha = std::clamp(a, 0.0, kAlphaClamp);
  return w;
}

PixelComposite composite_pixel(std::span<const Fragment> fragments,
                               const Eigen::Vector3d &background, bool check_order) {
  Compositor acc;
  for (std::size_t i = 0; i < fragments.size(); ++i) {
    if (check_order && i > 0 && fragments[i].depth < fragments[i - 1].depth)
      throw ContractViolation("fragments are not sorted by ascending depth (index " +
                              std::to_string(i) + ")");
    acc.add(fragments[i].alpha, fragments[i].color, fragments[i].depth);
  }
  return acc.finish(background);
}

namespace {

PreparedScene::PixelBox empty_box() { return {0, 0, -1, -1}; }

/// Inclusive integer range of pixels whose centers fall in [lo, hi] (continuous coords).
std::pair<int, int> pixel_span(double lo, double hi, int limit) {
  const double a = std::ceil(lo - 0.5);
  const double b = std::floor(hi - 0.5);
  const int i0 = static_cast<int>(std::clamp(a, -1.0, static_cast<double>(limit)));
  const int i1 = static_cast<int>(std::clamp(b, -1.0, static_cast<double>(limit)));
  return {std::max(i0, 0), std::min(i1, limit - 1)};
}

} // namespace

PreparedScene::PreparedScene(const core::SplatScene &scene, const Camera &camera)
    : camera_(camera) {
  std::visit([](const auto &c) { c.validate(); }, camera_);
  const auto &pose = projection::pose_of(camera_);
  const int width = projection::width_of(camera_);
  const int height = projection::height_of(camera_);
  range_ = {projection::near_of(camera_), projection::far_of(camera_)};
  order_ = sort_splats(scene, camera_);

  const std::size_t n = order_.size();
  view_.resize(n);
  screen_center_.resize(n);
  has_screen_center_.resize(n);
  color_.resize(n);
  opacity_.resize(n);
  boxes_.resize(n);

  const auto *ortho = std::get_if<OrthoCamera>(&camera_);

  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = order_[k];
    const auto &vs = view_[k] = projection::ViewSplat::from(
        scene.centers()[i], scene.rotations()[i], scene.scales()[i], pose);
    opacity_[k] = scene.opacities()[i];

    color_[k] = core::eval_sh(scene.sh_of(i), scene.sh_degree(),
                              sh_direction(scene.centers()[i], camera_));

    const auto proj = projection::project_point(scene.centers()[i], camera_);
    has_screen_center_[k] = ortho ? 1 : (vs.center.z() > 0.0 ? 1 : 0);
    screen_center_[k] = proj.pixel;

    // Continuous pixel-space bounds of the support: the 3-sigma disk plus the fallback radius.
    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
    double y_lo = x_lo, y_hi = -x_lo;
    auto include = [&](const Eigen::Vector2d &p, double pad) {
      x_lo = std::min(x_lo, p.x() - pad);
      x_hi = std::max(x_hi, p.x() + pad);
      y_lo = std::min(y_lo, p.y() - pad);
      y_hi = std::max(y_hi, p.y() + pad);
    };
    bool unbounded = false;
    const Eigen::Vector3d eu = kSupportRadius * vs.scale_u * vs.tangent_u;
    const Eigen::Vector3d ev = kSupportRadius * vs.scale_v * vs.tangent_v;
    if (ortho) {
      const double ex = std::hypot(eu.x(), ev.x());
      const double ey = std::hypot(eu.y(), ev.y());
      const Eigen::Vector2d c{(vs.center.x() - ortho->left) / ortho->gsd_x(),
                              (ortho->top - vs.center.y()) / ortho->gsd_y()};
      x_lo = c.x() - ex / ortho->gsd_x();
      x_hi = c.x() + ex / ortho->gsd_x();
      y_lo = c.y() - ey / ortho->gsd_y();
      y_hi = c.y() + ey / ortho->gsd_y();
    } else {
      const auto &persp = std::get<PerspectiveCamera>(camera_);
      const double fx = width / (2.0 * persp.right() / persp.z_near);
      const double fy = height / (2.0 * persp.top() / persp.z_near);
      for (int su : {-1, 1})
        for (int sv : {-1, 1}) {
          const Eigen::Vector3d p = vs.center + su * eu + sv * ev;
          if (!(p.z() > 0.0)) {
            unbounded = true;
            continue;
          }
          include({0.5 * width + fx * p.x() / p.z(), 0.5 * height - fy * p.y() / p.z()}, 0.0);
        }
    }
    if (has_screen_center_[k] && screen_center_[k].allFinite())
      include(screen_center_[k], kScreenSupportPx);
    if (unbounded) {
      x_lo = y_lo = -std::numeric_limits<double>::infinity();
      x_hi = y_hi = std::numeric_limits<double>::infinity();
    }
    // One pixel of padding absorbs rounding between the box and per-pixel evaluation.
    const auto [bx0, bx1] = pixel_span(x_lo - 1.0, x_hi + 1.0, width);
    const auto [by0, by1] = pixel_span(y_lo - 1.0, y_hi + 1.0, height);
    boxes_[k] = (bx0 <= bx1 && by0 <= by1) ? PixelBox{bx0, by0, bx1, by1} : empty_box();
  }
}

std::optional<Fragment> PreparedScene::fragment(std::size_t k, int px, int py,
                                                const projection::Ray &ray) const {
  const PixelBox &box = boxes_[k];
  if (px < box.x0 || px > box.x1 || py < box.y0 || py > box.y1)
    return std::nullopt;
  const auto hit = projection::ray_splat_intersect(ray, view_[k], range_);
  if (!hit)
    return std::nullopt;
  Eigen::Vector2d offset = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
  if (has_screen_center_[k])
    offset = Eigen::Vector2d(px + 0.5, py + 0.5) - screen_center_[k];
  const SplatWeight w = splat_alpha(*hit, opacity_[k], offset);
  if (w.alpha < kMinFragmentAlpha)
    return std::nullopt;
  Fragment f;
  f.splat_index = order_[k];
  f.alpha = w.alpha;
  f.depth = w.center_depth ? view_[k].center.z() : hit->view_depth;
  f.color = color_[k];
  f.weight = std::max(w.ray_gaussian, w.screen_gaussian);
  f.clamped = w.clamped;
  f.center_depth = w.center_depth;
  return f;
}

void PreparedScene::fragments_at(int px, int py, std::vector<Fragment> &out) const {
  out.clear();
  const auto ray = projection::pixel_ray(px, py, camera_);
  for (std::size_t k = 0; k < order_.size(); ++k)
    if (auto f = fragment(k, px, py, ray))
      out.push_back(*f);
}

FrameBuffer render(const core::SplatScene &scene, const Camera &camera,
                   const RenderOptions &options) {
  const PreparedScene prepared(scene, camera);
  const int cam_w = projection::width_of(camera);
  const int cam_h = projection::height_of(camera);
  const PixelWindow win = options.window.value_or(PixelWindow{0, 0, cam_w, cam_h});
  if (win.x0 < 0 || win.y0 < 0 || win.width < 1 || win.height < 1 ||
      win.x0 + win.width > cam_w || win.y0 + win.height > cam_h)
    throw InvalidInput("render window lies outside the camera image");

  FrameBuffer fb(win.width, win.height, options.background);
  const int tiles_x = (win.width + kWorkTileSize - 1) / kWorkTileSize;
  const int tiles_y = (win.height + kWorkTileSize - 1) / kWorkTileSize;

  std::vector<std::vector<std::uint32_t>> bins(static_cast<std::size_t>(tiles_x) * tiles_y);
  for (std::size_t k = 0; k < prepared.size(); ++k) {
    const auto &box = prepared.pixel_box(k);
    const int x0 = std::max(box.x0, win.x0) - win.x0;
    const int x1 = std::min(box.x1, win.x0 + win.width - 1) - win.x0;
    const int y0 = std::max(box.y0, win.y0) - win.y0;
    const int y1 = std::min(box.y1, win.y0 + win.height - 1) - win.y0;
    if (x0 > x1 || y0 > y1)
      continue;
    for (int ty = y0 / kWorkTileSize; ty <= y1 / kWorkTileSize; ++ty)
      for (int tx = x0 / kWorkTileSize; tx <= x1 / kWorkTileSize; ++tx)
        bins[static_cast<std::size_t>(ty) * tiles_x + tx].push_back(static_cast<std::uint32_t>(k));
  }

  parallel_for(bins.size(), options.threads, [&](std::size_t t) {
    const auto &bin = bins[t];
    if (bin.empty())
      return;
    const int tx = static_cast<int>(t % tiles_x), ty = static_cast<int>(t / tiles_x);
    const int y_end = std::min((ty + 1) * kWorkTileSize, win.height);
    const int x_end = std::min((tx + 1) * kWorkTileSize, win.width);
    for (int ly = ty * kWorkTileSize; ly < y_end; ++ly)
      for (int lx = tx * kWorkTileSize; lx < x_end; ++lx) {
        const int px = win.x0 + lx, py = win.y0 + ly;
        const auto ray = projection::pixel_ray(px, py, camera);
        Compositor acc;
        for (std::uint32_t k : bin)
          if (auto f = prepared.fragment(k, px, py, ray))
            acc.add(f->alpha, f->color, f->depth);
        const auto out = acc.finish(fb.background);
        const std::size_t i = fb.index(lx, ly);
        fb.color[i] = out.color;
        fb.depth[i] = out.depth;
        fb.accum_alpha[i] = out.accum_alpha;
      }
  });
  return fb;
}

} // namespace orthosplat::raster
