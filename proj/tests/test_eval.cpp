#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>

#include "orthosplat/error.hpp"
#include "orthosplat/eval.hpp"
#include "support.hpp"

using namespace orthosplat;
using namespace orthosplat::eval;
using namespace testing_support;

namespace {

constexpr double kRad = std::numbers::pi / 180.0;

// Spherical law of cosines in extended precision.
double law_of_cosines(double lat1, double lon1, double lat2, double lon2) {
  const long double p1 = lat1 * static_cast<long double>(kRad), p2 = lat2 * static_cast<long double>(kRad);
  const long double dl = (lon2 - lon1) * static_cast<long double>(kRad);
  long double c = sinl(p1) * sinl(p2) + cosl(p1) * cosl(p2) * cosl(dl);
  c = std::clamp(c, -1.0L, 1.0L);
  return static_cast<double>(6371000.0L * acosl(c));
}

// Point reached from (lat, lon) after `dist` meters along `bearing` (radians from north).
std::pair<double, double> destination(double lat, double lon, double bearing, double dist) {
  const double d = dist / 6371000.0, p1 = lat * kRad, l1 = lon * kRad;
  const double p2 = std::asin(std::sin(p1) * std::cos(d) + std::cos(p1) * std::sin(d) * std::cos(bearing));
  const double l2 = l1 + std::atan2(std::sin(bearing) * std::sin(d) * std::cos(p1),
                                    std::cos(d) - std::sin(p1) * std::sin(p2));
  return {p2 / kRad, l2 / kRad};
}

// GCPs laid out on a local east/north grid around (lat0, lon0) and imaged at `gsd`.
std::vector<GcpRecord> synthetic_gcps(Rng &rng, int n, double gsd, double spread) {
  const double lat0 = 31.2, lon0 = 121.5;
  std::vector<GcpRecord> out;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d en = i == 0 ? Eigen::Vector2d::Zero()
                                      : Eigen::Vector2d(uniform(rng, -spread, spread), uniform(rng, -spread, spread));
    const auto [lat, lon] = destination(lat0, lon0, std::atan2(en.x(), en.y()), en.norm());
    GcpRecord g;
    g.id = "GCP-" + std::to_string(101 + i);
    g.lat = lat;
    g.lon = lon;
    g.tdom_px = {2000 + en.x() / gsd, 2000 - en.y() / gsd};
    out.push_back(g);
  }
  return out;
}

Image<double> plateau(int size, int lo, int hi, double height) {
  Image<double> img(size, size, 1, 0.0);
  for (int y = lo; y < hi; ++y)
    for (int x = lo; x < hi; ++x)
      img.at(x, y) = height;
  return img;
}

int count(const ImageU8 &img) {
  int n = 0;
  for (auto v : img.data())
    n += v != 0;
  return n;
}

} // namespace

TEST(Haversine, IdenticalPointsAreZero) {
  EXPECT_EQ(haversine(12.5, -40.25, 12.5, -40.25), 0.0);
}

TEST(Haversine, OneDegreeOfLongitudeOnTheEquator) {
  EXPECT_NEAR(haversine(0, 0, 0, 1), 6371000.0 * std::numbers::pi / 180.0, 1e-6);
  EXPECT_NEAR(haversine(0, 0, 0, 1), 111194.93, 0.01);
}

TEST(Haversine, OutOfRangeRejected) {
  EXPECT_THROW(haversine(91, 0, 0, 0), InvalidInput);
  EXPECT_THROW(haversine(0, 0, 0, -180.5), InvalidInput);
  EXPECT_THROW(haversine(std::nan(""), 0, 0, 0), InvalidInput);
}

TEST(Haversine, MatchesLawOfCosinesBeyondOneKilometer) {
  Rng rng(50);
  int checked = 0;
  while (checked < 1000) {
    const double a = uniform(rng, -90, 90), b = uniform(rng, -180, 180);
    const double c = uniform(rng, -90, 90), d = uniform(rng, -180, 180);
    const double oracle = law_of_cosines(a, b, c, d);
    if (oracle <= 1000.0)
      continue;
    EXPECT_NEAR(haversine(a, b, c, d) / oracle, 1.0, 1e-9);
    ++checked;
  }
}

TEST(Haversine, MetricAxiomsOnRandomTriples) {
  Rng rng(51);
  for (int i = 0; i < 1000; ++i) {
    const double p[6] = {uniform(rng, -90, 90), uniform(rng, -180, 180), uniform(rng, -90, 90),
                         uniform(rng, -180, 180), uniform(rng, -90, 90), uniform(rng, -180, 180)};
    const double ab = haversine(p[0], p[1], p[2], p[3]);
    EXPECT_EQ(ab, haversine(p[2], p[3], p[0], p[1]));
    EXPECT_GT(ab, 0.0);
    EXPECT_LE(haversine(p[0], p[1], p[4], p[5]),
              ab + haversine(p[2], p[3], p[4], p[5]) + 1e-9);
  }
}

TEST(GcpScale, HundredMetersOverThousandPixels) {
  const auto [lat, lon] = destination(10, 20, 0, 100);
  std::vector<GcpRecord> g{{"A", 10, 20, {0, 0}}, {"B", lat, lon, {0, 1000}}};
  EXPECT_NEAR(gcp_scale_align(g, {"A", "B"}), 0.1, 1e-12);
  const auto report = gcp_errors(g, 0.1, GcpPair{"A", "B"});
  ASSERT_EQ(report.pair_errors.size(), 1u);
  EXPECT_EQ(report.pair_errors[0].abs_error_m, 0.0);
  EXPECT_TRUE(report.pair_errors[0].anchor);
}

TEST(GcpScale, ZeroPixelSeparationRejected) {
  std::vector<GcpRecord> g{{"A", 10, 20, {5, 5}}, {"B", 10.001, 20, {5, 5}}};
  EXPECT_THROW(gcp_scale_align(g, {"A", "B"}), InvalidInput);
  EXPECT_THROW(gcp_scale_align(g, {"A", "C"}), InvalidInput);
}

TEST(GcpScale, RecoversSyntheticGsd) {
  Rng rng(52);
  const auto g = synthetic_gcps(rng, 8, 0.05, 150);
  const double s = gcp_scale_align(g, {g[0].id, g[3].id});
  EXPECT_NEAR(s / 0.05, 1.0, 1e-6);
  const auto report = gcp_errors(g, s, GcpPair{g[0].id, g[3].id});
  EXPECT_EQ(report.pair_errors.size(), 28u);
  for (const auto &e : report.pair_errors) {
    EXPECT_LT(e.abs_error_m, 1e-6) << e.id_a << "-" << e.id_b;
    if (e.anchor)
      EXPECT_EQ(e.abs_error_m, 0.0);
  }
}

TEST(GcpErrors, PerturbationIsBoundedByItsPixelShift) {
  Rng rng(53);
  auto g = synthetic_gcps(rng, 6, 0.1, 200);
  const auto before = gcp_errors(g, 0.1);
  g[2].tdom_px.x() += 10;
  const auto after = gcp_errors(g, 0.1);
  for (std::size_t i = 0; i < before.pair_errors.size(); ++i) {
    const auto &b = before.pair_errors[i], &a = after.pair_errors[i];
    const double shift = std::abs(a.abs_error_m - b.abs_error_m);
    if (a.id_a == g[2].id || a.id_b == g[2].id)
      EXPECT_LE(shift, 1.0 + 1e-9);
    else
      EXPECT_EQ(shift, 0.0);
  }
}

TEST(GcpErrors, ScalingPixelsAndFactorTogetherChangesNothing) {
  Rng rng(54);
  auto g = synthetic_gcps(rng, 6, 0.2, 300);
  const auto base = gcp_errors(g, 0.21);
  for (double k : {0.5, 3.0, 17.25}) {
    auto scaled = g;
    for (auto &r : scaled)
      r.tdom_px *= k;
    const auto r = gcp_errors(scaled, 0.21 / k);
    for (std::size_t i = 0; i < base.pair_errors.size(); ++i)
      EXPECT_NEAR(r.pair_errors[i].abs_error_m, base.pair_errors[i].abs_error_m, 1e-9);
  }
}

TEST(GcpErrors, ExplicitPairsAndUnknownIds) {
  Rng rng(55);
  const auto g = synthetic_gcps(rng, 4, 0.1, 100);
  const auto r = gcp_errors(g, 0.1, {}, {{g[3].id, g[1].id}});
  ASSERT_EQ(r.pair_errors.size(), 1u);
  EXPECT_EQ(r.pair_errors[0].id_a, g[3].id);
  EXPECT_THROW(gcp_errors(g, 0.1, {}, {{"nope", g[1].id}}), InvalidInput);
}

TEST(GcpReport, TextAndCsvCarryEveryPair) {
  Rng rng(56);
  const auto g = synthetic_gcps(rng, 3, 0.1, 100);
  const auto r = gcp_errors(g, 0.1, GcpPair{g[0].id, g[1].id});
  const std::string text = format_report(r);
  EXPECT_NE(text.find("6371000"), std::string::npos);
  EXPECT_NE(text.find(g[2].id), std::string::npos);
  const std::string csv = report_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "pair,id_a,id_b,true_m,measured_m,abs_error_m,anchor");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST(GcpCsv, ParsesWellFormedInput) {
  const auto g = parse_gcp_csv("id,lat,lon,px,py\nGCP-101, 31.5,121.25,10.5,20\n\nGCP-102,31.6,121.3,11,22\n");
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[0].id, "GCP-101");
  EXPECT_EQ(g[0].tdom_px, Eigen::Vector2d(10.5, 20));
  EXPECT_EQ(g[1].lat, 31.6);
}

TEST(GcpCsv, ErrorsNameTheLine) {
  auto message = [](const std::string &text) {
    try {
      parse_gcp_csv(text, "gcps.csv");
    } catch (const SchemaError &e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("id,lat,lon,px,py\nA,1,2,3,4\nB,1,2,x,4\n").find("gcps.csv line 3"), std::string::npos);
  EXPECT_NE(message("id,lat,lon,px,py\nA,1,2,3\n").find("line 2"), std::string::npos);
  EXPECT_NE(message("id,lat,lon,px,py\nA,95,2,3,4\n").find("line 2"), std::string::npos);
  EXPECT_NE(message("id,lat,lon,px,py\nA,1,2,3,4\nA,1,2,3,4\n").find("duplicate"), std::string::npos);
  EXPECT_NE(message("name,lat,lon,x,y\n").find("line 1"), std::string::npos);
  EXPECT_NE(message("").find("empty"), std::string::npos);
}

TEST(GcpCsv, PixelsMustLieInsideTheRaster) {
  std::vector<GcpRecord> g{{"A", 1, 2, {-0.5, 0}}, {"B", 1, 2, {99.5, 49.5}}};
  EXPECT_NO_THROW(validate_gcps(g, Eigen::Vector2i(100, 50)));
  g[1].tdom_px.x() = 99.6;
  EXPECT_THROW(validate_gcps(g, Eigen::Vector2i(100, 50)), InvalidInput);
}

TEST(Canny, ConstantImageHasNoEdges) {
  EXPECT_EQ(count(canny_edges(Image<double>(64, 48, 1, 0.7))), 0);
}

TEST(Canny, PlateauGivesClosedLoopOnItsBoundary) {
  const auto res = canny(plateau(200, 50, 150, 1.0));
  const auto &e = res.edges;
  // Boundary of the plateau lies at x, y = 49.5 and 149.5 in pixel-center coordinates.
  auto dist = [](int x, int y) {
    const double dx = std::max({49.5 - x, x - 149.5, 0.0});
    const double dy = std::max({49.5 - y, y - 149.5, 0.0});
    if (dx > 0 || dy > 0)
      return std::hypot(dx, dy);
    return std::min({x - 49.5, 149.5 - x, y - 49.5, 149.5 - y});
  };
  int n = 0, sx = -1, sy = -1;
  for (int y = 0; y < 200; ++y)
    for (int x = 0; x < 200; ++x)
      if (e.at(x, y)) {
        EXPECT_LE(dist(x, y), 1.0) << x << "," << y;
        ++n, sx = x, sy = y;
        int nb = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx)
            nb += (dx || dy) && e.at(x + dx, y + dy);
        EXPECT_GE(nb, 2) << "open end at " << x << "," << y;
      }
  ASSERT_GT(n, 300);
  // One 8-connected component.
  Image<int> seen(200, 200, 1, 0);
  std::queue<std::pair<int, int>> q;
  q.push({sx, sy});
  seen.at(sx, sy) = 1;
  int reached = 0;
  while (!q.empty()) {
    const auto [x, y] = q.front();
    q.pop();
    ++reached;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx, ny = y + dy;
        if (nx >= 0 && ny >= 0 && nx < 200 && ny < 200 && e.at(nx, ny) && !seen.at(nx, ny)) {
          seen.at(nx, ny) = 1;
          q.push({nx, ny});
        }
      }
  }
  EXPECT_EQ(reached, n);
  // Every side is traced.
  for (int t = 55; t < 145; ++t) {
    EXPECT_TRUE(e.at(49, t) || e.at(50, t));
    EXPECT_TRUE(e.at(149, t) || e.at(150, t));
    EXPECT_TRUE(e.at(t, 49) || e.at(t, 50));
    EXPECT_TRUE(e.at(t, 149) || e.at(t, 150));
  }
}

TEST(Canny, HysteresisOnlyRemovesNmsPixels) {
  Rng rng(57);
  for (int trial = 0; trial < 10; ++trial) {
    Image<double> img(80, 60);
    for (auto &v : img.data())
      v = uniform(rng, 0, 1);
    const auto res = canny(img, {0.05, 0.2, 1.0});
    int extra = 0, kept = 0;
    for (std::size_t i = 0; i < img.data().size(); ++i) {
      extra += res.edges.data()[i] && !res.nms.data()[i];
      kept += res.edges.data()[i] != 0;
    }
    EXPECT_EQ(extra, 0);
    EXPECT_GT(kept, 0);
    EXPECT_GE(count(res.nms), kept);
  }
}

TEST(Canny, GradientBelowLowThresholdYieldsNothing) {
  Rng rng(58);
  for (int trial = 0; trial < 10; ++trial) {
    Image<double> img(60, 60);
    const double sx = uniform(rng, -0.01, 0.01), sy = uniform(rng, -0.01, 0.01);
    for (int y = 0; y < 60; ++y)
      for (int x = 0; x < 60; ++x)
        img.at(x, y) = sx * x + sy * y + uniform(rng, 0, 0.004);
    const auto res = canny(img);
    double max_mag = 0;
    for (double m : res.magnitude.data())
      max_mag = std::max(max_mag, m);
    ASSERT_LT(max_mag, 0.1);
    EXPECT_EQ(count(res.edges), 0);
    EXPECT_EQ(count(res.nms), 0);
  }
}

TEST(NormalizeMinmax, RangeAndConstantInput) {
  Image<double> img(3, 1);
  img.data() = {2, 4, 6};
  const auto n = normalize_minmax(img);
  EXPECT_EQ(n.data(), (std::vector<double>{0, 0.5, 1}));
  ImageU8 mask(3, 1);
  mask.data() = {0, 1, 1};
  EXPECT_EQ(normalize_minmax(img, &mask).data(), (std::vector<double>{0, 0, 1}));
  EXPECT_EQ(normalize_minmax(Image<double>(4, 4, 1, 3.0)).data(), std::vector<double>(16, 0.0));
}

TEST(DepthOverlays, ZeroDepthLeavesRedZeroAndKeepsGreenBlue) {
  Rng rng(59);
  ImageU8 rgb(40, 30, 3);
  for (auto &v : rgb.data())
    v = static_cast<std::uint8_t>(uniform(rng, 0, 255));
  const auto o = depth_overlays(rgb, Image<double>(40, 30, 1, 0.0));
  for (int y = 0; y < 30; ++y)
    for (int x = 0; x < 40; ++x) {
      EXPECT_EQ(o.red_composite.at(x, y, 0), 0);
      EXPECT_EQ(o.red_composite.at(x, y, 1), rgb.at(x, y, 1));
      EXPECT_EQ(o.red_composite.at(x, y, 2), rgb.at(x, y, 2));
    }
  EXPECT_EQ(count(o.edges), 0);
  EXPECT_EQ(o.edge_overlay, rgb);
}

TEST(DepthOverlays, TallerStructuresAreRedderAndEdgesArePainted) {
  ImageU8 rgb(120, 120, 3, 90);
  // Camera 50 m up: ground at depth 50, a 10 m building at depth 40.
  Image<double> depth(120, 120, 1, 50.0);
  for (int y = 40; y < 80; ++y)
    for (int x = 30; x < 90; ++x)
      depth.at(x, y) = 40.0;
  const auto o = depth_overlays(rgb, depth);
  EXPECT_GT(o.red_composite.at(60, 60, 0), o.red_composite.at(5, 5, 0));
  EXPECT_EQ(o.red_composite.at(60, 60, 0), 255);
  const int edges = count(o.edges);
  EXPECT_GT(edges, 100);
  EXPECT_EQ(edges, count(canny_edges(normalize_minmax(depth))));
  int painted = 0;
  for (int y = 0; y < 120; ++y)
    for (int x = 0; x < 120; ++x) {
      const bool hl = o.edge_overlay.at(x, y, 0) == kHighlight[0] &&
                      o.edge_overlay.at(x, y, 1) == kHighlight[1] &&
                      o.edge_overlay.at(x, y, 2) == kHighlight[2];
      painted += hl;
      EXPECT_EQ(hl, o.edges.at(x, y) != 0);
    }
  EXPECT_EQ(painted, edges);
}

TEST(DepthOverlays, MaskExcludesUncoveredPixels) {
  ImageU8 rgb(10, 1, 3, 100);
  Image<double> depth(10, 1);
  depth.data() = {0, 0, 5, 6, 7, 8, 9, 10, 11, 12};
  ImageU8 mask(10, 1, 1, 1);
  mask.at(0, 0) = mask.at(1, 0) = 0;
  const auto o = depth_overlays(rgb, depth, {}, &mask);
  EXPECT_EQ(o.red_composite.at(0, 0, 0), 0);
  EXPECT_EQ(o.red_composite.at(2, 0, 0), 255);
  EXPECT_EQ(o.red_composite.at(9, 0, 0), 0);
}

TEST(DepthOverlays, MismatchedSizesRejected) {
  EXPECT_THROW(depth_overlays(ImageU8(4, 4, 3), Image<double>(5, 4)), InvalidInput);
}
