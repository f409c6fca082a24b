#include "orthosplat/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>

#include "orthosplat/error.hpp"

namespace orthosplat::eval {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

void check_latlon(double lat, double lon) {
  if (!(lat >= -90.0 && lat <= 90.0) || !(lon >= -180.0 && lon <= 180.0))
    throw InvalidInput("latitude/longitude out of range: (" + std::to_string(lat) + ", " +
                       std::to_string(lon) + ")");
}

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string &line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ls(line);
  while (std::getline(ls, field, ','))
    out.push_back(trim(field));
  if (!line.empty() && line.back() == ',')
    out.emplace_back();
  return out;
}

const GcpRecord &find(const std::vector<GcpRecord> &gcps, const std::string &id) {
  for (const auto &g : gcps)
    if (g.id == id)
      return g;
  throw InvalidInput("unknown GCP id '" + id + "'");
}

double true_distance(const GcpRecord &a, const GcpRecord &b) {
  return haversine(a.lat, a.lon, b.lat, b.lon);
}

double pixel_distance(const GcpRecord &a, const GcpRecord &b) {
  return (a.tdom_px - b.tdom_px).norm();
}

bool same_pair(const GcpPair &p, const std::string &a, const std::string &b) {
  return (p.first == a && p.second == b) || (p.first == b && p.second == a);
}

} // namespace

double haversine(double lat1, double lon1, double lat2, double lon2) {
  check_latlon(lat1, lon1);
  check_latlon(lat2, lon2);
  const double dphi = (lat2 - lat1) * kDeg;
  const double dlambda = (lon2 - lon1) * kDeg;
  const double s1 = std::sin(0.5 * dphi), s2 = std::sin(0.5 * dlambda);
  const double a = s1 * s1 + std::cos(lat1 * kDeg) * std::cos(lat2 * kDeg) * s2 * s2;
  return 2.0 * kEarthRadius * std::atan2(std::sqrt(a), std::sqrt(std::max(0.0, 1.0 - a)));
}

std::vector<GcpRecord> parse_gcp_csv(const std::string &text, const std::string &source) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string &what) -> void {
    throw SchemaError(source + " line " + std::to_string(line_no) + ": " + what);
  };
  std::vector<GcpRecord> out;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty())
      continue;
    const auto fields = split_csv(line);
    if (!header) {
      if (fields != std::vector<std::string>{"id", "lat", "lon", "px", "py"})
        fail("expected header 'id,lat,lon,px,py'");
      header = true;
      continue;
    }
    if (fields.size() != 5)
      fail("expected 5 fields, got " + std::to_string(fields.size()));
    GcpRecord g;
    g.id = fields[0];
    if (g.id.empty())
      fail("empty id");
    double v[4];
    for (int k = 0; k < 4; ++k) {
      const std::string &f = fields[k + 1];
      std::size_t used = 0;
      try {
        v[k] = std::stod(f, &used);
      } catch (const std::exception &) {
        used = 0;
      }
      if (used == 0 || used != f.size() || !std::isfinite(v[k]))
        fail("not a number: '" + f + "'");
    }
    g.lat = v[0];
    g.lon = v[1];
    g.tdom_px = {v[2], v[3]};
    try {
      check_latlon(g.lat, g.lon);
    } catch (const InvalidInput &e) {
      fail(e.what());
    }
    for (const auto &prev : out)
      if (prev.id == g.id)
        fail("duplicate id '" + g.id + "'");
    out.push_back(std::move(g));
  }
  if (!header)
    throw SchemaError(source + ": empty GCP file");
  return out;
}

std::vector<GcpRecord> read_gcp_csv(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_gcp_csv(text.str(), "'" + path.string() + "'");
}

void validate_gcps(const std::vector<GcpRecord> &gcps, std::optional<Eigen::Vector2i> size) {
  for (const auto &g : gcps) {
    check_latlon(g.lat, g.lon);
    if (!g.tdom_px.allFinite())
      throw InvalidInput("GCP '" + g.id + "' has non-finite pixel coordinates");
    // Pixel centers sit at integers, so the raster spans [-0.5, size - 0.5].
    if (size && (g.tdom_px.x() < -0.5 || g.tdom_px.y() < -0.5 ||
                 g.tdom_px.x() > size->x() - 0.5 || g.tdom_px.y() > size->y() - 0.5))
      throw InvalidInput("GCP '" + g.id + "' lies outside the TDOM");
  }
}

double gcp_scale_align(const std::vector<GcpRecord> &gcps, const GcpPair &anchor) {
  const auto &a = find(gcps, anchor.first);
  const auto &b = find(gcps, anchor.second);
  const double px = pixel_distance(a, b);
  if (!(px > 0.0))
    throw InvalidInput("anchor pair " + a.id + "-" + b.id + " has zero pixel separation");
  const double m = true_distance(a, b);
  if (!(m > 0.0))
    throw InvalidInput("anchor pair " + a.id + "-" + b.id + " has zero true distance");
  return m / px;
}

GcpErrorReport gcp_errors(const std::vector<GcpRecord> &gcps, double scale_factor,
                          std::optional<GcpPair> anchor, const std::vector<GcpPair> &pairs) {
  if (gcps.size() < 2)
    throw InvalidInput("at least 2 GCPs are required");
  if (!(scale_factor > 0.0) || !std::isfinite(scale_factor))
    throw InvalidInput("scale factor must be positive");
  validate_gcps(gcps);
  GcpErrorReport report;
  report.scale_factor = scale_factor;
  report.anchor = anchor;

  std::vector<GcpPair> wanted = pairs;
  if (wanted.empty())
    for (std::size_t i = 0; i < gcps.size(); ++i)
      for (std::size_t j = i + 1; j < gcps.size(); ++j)
        wanted.emplace_back(gcps[i].id, gcps[j].id);

  for (const auto &[ia, ib] : wanted) {
    const auto &a = find(gcps, ia);
    const auto &b = find(gcps, ib);
    PairError e;
    e.id_a = a.id;
    e.id_b = b.id;
    e.true_m = true_distance(a, b);
    e.anchor = anchor && same_pair(*anchor, a.id, b.id);
    // (m / px) * px need not round back to m; the anchor is exact by definition.
    e.measured_m = e.anchor ? e.true_m : scale_factor * pixel_distance(a, b);
    e.abs_error_m = std::abs(e.measured_m - e.true_m);
    report.pair_errors.push_back(e);
  }
  return report;
}

std::string format_report(const GcpErrorReport &r) {
  std::ostringstream out;
  out << "GCP absolute distance errors\n";
  out << "earth radius (m): " << std::fixed << std::setprecision(0) << r.earth_radius << "\n";
  out << "scale factor (m/px): " << std::setprecision(9) << r.scale_factor << "\n";
  if (r.anchor)
    out << "anchor pair: " << r.anchor->first << "-" << r.anchor->second << "\n";
  out << "\n";
  std::size_t w = 4;
  for (const auto &e : r.pair_errors)
    w = std::max(w, e.id_a.size() + e.id_b.size() + 1);
  out << std::left << std::setw(static_cast<int>(w) + 2) << "pair" << std::right
      << std::setw(16) << "true (m)" << std::setw(16) << "measured (m)" << std::setw(16)
      << "abs error (m)" << "\n";
  out << std::setprecision(6);
  for (const auto &e : r.pair_errors)
    out << std::left << std::setw(static_cast<int>(w) + 2) << (e.id_a + "-" + e.id_b)
        << std::right << std::setw(16) << e.true_m << std::setw(16) << e.measured_m
        << std::setw(16) << e.abs_error_m << (e.anchor ? "  (anchor)" : "") << "\n";
  return out.str();
}

std::string report_csv(const GcpErrorReport &r) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "pair,id_a,id_b,true_m,measured_m,abs_error_m,anchor\n";
  for (const auto &e : r.pair_errors)
    out << e.id_a << "-" << e.id_b << "," << e.id_a << "," << e.id_b << "," << e.true_m << ","
        << e.measured_m << "," << e.abs_error_m << "," << (e.anchor ? 1 : 0) << "\n";
  return out.str();
}

Image<double> normalize_minmax(const Image<double> &image, const ImageU8 *mask) {
  if (mask && (mask->width() != image.width() || mask->height() != image.height()))
    throw InvalidInput("mask and image sizes differ");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  const auto &d = image.data();
  for (std::size_t i = 0; i < d.size(); ++i)
    if (!mask || mask->data()[i]) {
      lo = std::min(lo, d[i]);
      hi = std::max(hi, d[i]);
    }
  Image<double> out(image.width(), image.height());
  if (!(hi > lo))
    return out;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (!mask || mask->data()[i])
      out.data()[i] = (d[i] - lo) / (hi - lo);
  return out;
}

Overlays depth_overlays(const ImageU8 &tdom, const Image<double> &depth,
                        const CannyParams &params, const ImageU8 *mask) {
  if (tdom.channels() != 3)
    throw InvalidInput("TDOM must be an RGB image");
  if (depth.channels() != 1 || tdom.width() != depth.width() || tdom.height() != depth.height())
    throw InvalidInput("TDOM and depth dimensions differ");
  const Image<double> norm = normalize_minmax(depth, mask);

  Overlays out;
  out.red_composite = tdom;
  bool varies = false;
  for (std::size_t i = 0; i < norm.data().size(); ++i)
    varies = varies || norm.data()[i] != 0.0;
  for (int y = 0; y < tdom.height(); ++y)
    for (int x = 0; x < tdom.width(); ++x) {
      const bool covered = !mask || mask->at(x, y);
      const double height = (covered && varies) ? 1.0 - norm.at(x, y) : 0.0;
      out.red_composite.at(x, y, 0) =
          static_cast<std::uint8_t>(std::lround(std::clamp(height, 0.0, 1.0) * 255.0));
    }

  out.edges = canny_edges(norm, params);
  out.edge_overlay = tdom;
  for (int y = 0; y < tdom.height(); ++y)
    for (int x = 0; x < tdom.width(); ++x)
      if (out.edges.at(x, y))
        for (int c = 0; c < 3; ++c)
          out.edge_overlay.at(x, y, c) = kHighlight[c];
  return out;
}

} // namespace orthosplat::eval
