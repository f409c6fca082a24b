#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "orthosplat/error.hpp"
#include "orthosplat/eval.hpp"

namespace orthosplat::eval {

namespace {

int clampi(int v, int lo, int hi) { return std::min(std::max(v, lo), hi); }

// Separable Gaussian with replicated borders, truncated at 3 sigma.
Image<double> blur(const Image<double> &in, double sigma) {
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * r + 1);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i)
    sum += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double &v : k)
    v /= sum;
  const int w = in.width(), h = in.height();
  Image<double> tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i)
        acc += k[i + r] * in.at(clampi(x + i, 0, w - 1), y);
      tmp.at(x, y) = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i)
        acc += k[i + r] * tmp.at(x, clampi(y + i, 0, h - 1));
      out.at(x, y) = acc;
    }
  return out;
}

} // namespace

CannyResult canny(const Image<double> &image, const CannyParams &p) {
  if (image.channels() != 1)
    throw InvalidInput("canny expects a single-channel image");
  if (!(p.low >= 0.0) || !(p.low < p.high))
    throw InvalidInput("canny thresholds must satisfy 0 <= low < high");
  if (!(p.sigma > 0.0))
    throw InvalidInput("canny sigma must be positive");

  const int w = image.width(), h = image.height();
  CannyResult res;
  res.edges = ImageU8(w, h);
  res.nms = ImageU8(w, h);
  res.magnitude = Image<double>(w, h);
  if (w == 0 || h == 0)
    return res;

  const Image<double> s = blur(image, p.sigma);
  Image<double> gx(w, h), gy(w, h);
  auto at = [&](int x, int y) { return s.at(clampi(x, 0, w - 1), clampi(y, 0, h - 1)); };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      gx.at(x, y) = (at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1)) -
                    (at(x - 1, y - 1) + 2 * at(x - 1, y) + at(x - 1, y + 1));
      gy.at(x, y) = (at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1)) -
                    (at(x - 1, y - 1) + 2 * at(x, y - 1) + at(x + 1, y - 1));
      res.magnitude.at(x, y) = std::hypot(gx.at(x, y), gy.at(x, y));
    }

  // Suppression compares against the two neighbors along the quantized gradient direction;
  // strict on one side and non-strict on the other so flat-topped ridges keep one pixel.
  const double tan22 = std::tan(std::numbers::pi / 8.0);
  auto mag = [&](int x, int y) {
    return (x < 0 || y < 0 || x >= w || y >= h) ? 0.0 : res.magnitude.at(x, y);
  };
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double m = res.magnitude.at(x, y);
      if (!(m > p.low))
        continue;
      const double ax = std::abs(gx.at(x, y)), ay = std::abs(gy.at(x, y));
      int dx, dy;
      if (ay <= tan22 * ax) {
        dx = 1, dy = 0;
      } else if (ax <= tan22 * ay) {
        dx = 0, dy = 1;
      } else {
        dx = 1;
        dy = (gx.at(x, y) > 0) == (gy.at(x, y) > 0) ? 1 : -1;
      }
      if (m > mag(x - dx, y - dy) && m >= mag(x + dx, y + dy)) {
        res.nms.at(x, y) = 1;
        if (m > p.high) {
          res.edges.at(x, y) = 1;
          stack.emplace_back(x, y);
        }
      }
    }

  while (!stack.empty()) {
    const auto [x, y] = stack.back();
    stack.pop_back();
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h)
          continue;
        if (res.nms.at(nx, ny) && !res.edges.at(nx, ny)) {
          res.edges.at(nx, ny) = 1;
          stack.emplace_back(nx, ny);
        }
      }
  }
  return res;
}

} // namespace orthosplat::eval
