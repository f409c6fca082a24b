#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "orthosplat/image.hpp"

namespace orthosplat::eval {

inline constexpr double kEarthRadius = 6371000.0;

/// Great-circle distance in meters between two geodetic points given in degrees.
double haversine(double lat1, double lon1, double lat2, double lon2);

struct GcpRecord {
  std::string id;
  double lat = 0.0;
  double lon = 0.0;
  /// TDOM pixel coordinates, integer values at pixel centers.
  Eigen::Vector2d tdom_px = Eigen::Vector2d::Zero();
};

/// CSV with header `id,lat,lon,px,py`. Errors name the offending line.
std::vector<GcpRecord> read_gcp_csv(const std::filesystem::path &path);
std::vector<GcpRecord> parse_gcp_csv(const std::string &text, const std::string &source = "<gcp>");

/// Checks coordinate ranges and, when a size is given, that pixels lie inside the raster.
void validate_gcps(const std::vector<GcpRecord> &gcps, std::optional<Eigen::Vector2i> size = {});

using GcpPair = std::pair<std::string, std::string>;

/// Meters per TDOM pixel from the anchor pair: true distance / pixel distance.
double gcp_scale_align(const std::vector<GcpRecord> &gcps, const GcpPair &anchor);

struct PairError {
  std::string id_a, id_b;
  double true_m = 0.0;
  double measured_m = 0.0;
  double abs_error_m = 0.0;
  bool anchor = false;
};

struct GcpErrorReport {
  double scale_factor = 0.0;
  double earth_radius = kEarthRadius;
  std::optional<GcpPair> anchor;
  std::vector<PairError> pair_errors;
};

/// Errors for `pairs`, or for every unordered pair in input order when empty. The anchor
/// pair reports its true distance as measured.
GcpErrorReport gcp_errors(const std::vector<GcpRecord> &gcps, double scale_factor,
                          std::optional<GcpPair> anchor = {},
                          const std::vector<GcpPair> &pairs = {});

std::string format_report(const GcpErrorReport &report);
std::string report_csv(const GcpErrorReport &report);

struct CannyParams {
  double low = 0.1;
  double high = 0.3;
  double sigma = 1.4;
};

struct CannyResult {
  ImageU8 edges;          ///< 1 on edge pixels
  ImageU8 nms;            ///< thin local maxima above the low threshold, before hysteresis
  Image<double> magnitude; ///< Sobel L2 magnitude of the blurred input
};

/// Gaussian blur, Sobel, non-maximum suppression and hysteresis on a single-channel image.
CannyResult canny(const Image<double> &image, const CannyParams &params = {});
inline ImageU8 canny_edges(const Image<double> &image, const CannyParams &params = {}) {
  return canny(image, params).edges;
}

/// Min-max normalization to [0, 1] over pixels where `mask` is set (all when empty).
/// Constant input maps to 0.
Image<double> normalize_minmax(const Image<double> &image, const ImageU8 *mask = nullptr);

struct Overlays {
  ImageU8 red_composite;
  ImageU8 edge_overlay;
  ImageU8 edges;
};

inline constexpr std::uint8_t kHighlight[3] = {0, 255, 255};

/// Red channel := normalized height (inverted min-max of depth, so nearer surfaces are
/// redder); edge pixels of the normalized depth are painted kHighlight. Pixels where `mask`
/// is zero keep red 0 and are excluded from the normalization range.
Overlays depth_overlays(const ImageU8 &tdom_rgb, const Image<double> &depth,
                        const CannyParams &params = {}, const ImageU8 *mask = nullptr);

} // namespace orthosplat::eval
