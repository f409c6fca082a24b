#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <Eigen/LU>

#include "orthosplat/error.hpp"
#include "orthosplat/projection.hpp"
#include "support.hpp"

using namespace orthosplat;
using namespace orthosplat::projection;
using namespace testing_support;

namespace {

Eigen::Vector3d to_ndc(const Eigen::Matrix4d &m, const Eigen::Vector3d &p) {
  const Eigen::Vector4d c = m * p.homogeneous();
  return c.head<3>() / c.w();
}

bool in_frustum(const PerspectiveCamera &c, const Eigen::Vector3d &p) {
  return p.z() >= c.z_near && p.z() <= c.z_far &&
         std::abs(p.x()) <= p.z() * std::tan(c.fov_x / 2) &&
         std::abs(p.y()) <= p.z() * std::tan(c.fov_y / 2);
}

} // namespace

TEST(PerspectiveMatrix, RightAngleFovGivesUnitExtent) {
  const auto cam = perspective(std::numbers::pi / 2, std::numbers::pi / 2, 1, 3, 100, 100);
  EXPECT_NEAR(cam.right(), 1.0, 1e-15);
  EXPECT_NEAR(cam.top(), 1.0, 1e-15);
}

TEST(PerspectiveMatrix, NearAndFarMapToNdcEnds) {
  const auto cam = perspective(1.0, 0.8, 0.5, 40, 64, 48);
  const auto m = perspective_matrix(cam);
  EXPECT_NEAR(to_ndc(m, {0, 0, 0.5}).z(), -1.0, 1e-15);
  EXPECT_NEAR(to_ndc(m, {0, 0, 40}).z(), 1.0, 1e-15);
}

TEST(PerspectiveMatrix, CornersMapToCubeCornersWithRowFlip) {
  const auto cam = perspective(1.2, 0.9, 2, 50, 64, 48);
  const auto m = perspective_matrix(cam);
  for (double z : {2.0, 50.0}) {
    const double k = z / cam.z_near;
    for (int sx : {-1, 1})
      for (int sy : {-1, 1}) {
        const Eigen::Vector3d ndc = to_ndc(m, {sx * cam.right() * k, sy * cam.top() * k, z});
        EXPECT_NEAR(ndc.x(), sx, 1e-12);
        EXPECT_NEAR(ndc.y(), -sy, 1e-12); // up in view space is row 0
        EXPECT_NEAR(ndc.z(), z == 2.0 ? -1.0 : 1.0, 1e-12);
      }
  }
}

TEST(PerspectiveMatrix, ContainmentMatchesFrustumOracle) {
  Rng rng(10);
  int inside = 0;
  for (int i = 0; i < 2000; ++i) {
    const auto cam = perspective(uniform(rng, 0.3, 2.5), uniform(rng, 0.3, 2.5),
                                 uniform(rng, 0.1, 2), uniform(rng, 10, 100), 32, 32);
    const Eigen::Vector3d p(uniform(rng, -60, 60), uniform(rng, -60, 60), uniform(rng, -5, 110));
    const Eigen::Vector3d ndc = to_ndc(perspective_matrix(cam), p);
    const bool cube = p.z() > 0 && (ndc.array().abs() <= 1.0).all();
    // Skip points within rounding of a face.
    if ((ndc.array().abs() - 1.0).abs().minCoeff() < 1e-9)
      continue;
    EXPECT_EQ(cube, in_frustum(cam, p));
    inside += cube;
  }
  EXPECT_GT(inside, 100);
}

TEST(PerspectiveMatrix, InvalidFovRejected) {
  auto cam = perspective(std::numbers::pi, 1.0, 1, 2, 4, 4);
  EXPECT_THROW(cam.validate(), InvalidInput);
  cam = perspective(1.0, 1.0, 2, 1, 4, 4);
  EXPECT_THROW(cam.validate(), InvalidInput);
}

TEST(OrthoMatrix, SymmetricBoxIsPureScaleInXY) {
  const auto m = ortho_matrix(ortho(-1, 1, -1, 1, 0, 2, 8, 8));
  EXPECT_EQ(m(0, 3), 0.0);
  EXPECT_EQ(m(1, 3), 0.0);
  EXPECT_EQ(m.row(3), Eigen::RowVector4d(0, 0, 0, 1));
  EXPECT_EQ(m(0, 1), 0.0);
  EXPECT_EQ(m(1, 0), 0.0);
}

TEST(OrthoMatrix, LeftBottomNearCorner) {
  const auto cam = ortho(-3, 5, -2, 4, 1, 9, 8, 6);
  const Eigen::Vector3d ndc = to_ndc(ortho_matrix(cam), {-3, -2, 1});
  EXPECT_NEAR((ndc - Eigen::Vector3d(-1, 1, -1)).norm(), 0.0, 1e-15);
}

TEST(OrthoMatrix, RandomBoxesMatchPerAxisAffineMap) {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const double l = uniform(rng, -100, 100), r = l + uniform(rng, 0.1, 100);
    const double b = uniform(rng, -100, 100), t = b + uniform(rng, 0.1, 100);
    const double n = uniform(rng, -10, 10), f = n + uniform(rng, 0.1, 100);
    const auto m = ortho_matrix(ortho(l, r, b, t, n, f, 10, 10));
    const Eigen::Vector3d p(uniform(rng, l, r), uniform(rng, b, t), uniform(rng, n, f));
    const Eigen::Vector3d expected(2 * (p.x() - l) / (r - l) - 1, 1 - 2 * (p.y() - b) / (t - b),
                                   2 * (p.z() - n) / (f - n) - 1);
    EXPECT_LT((to_ndc(m, p) - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(OrthoMatrix, DegenerateBoxRejected) {
  EXPECT_THROW(ortho(1, 1, 0, 1, 0, 1, 4, 4).validate(), InvalidInput);
  EXPECT_THROW(ortho(0, 1, 0, 1, 2, 2, 4, 4).validate(), InvalidInput);
}

TEST(OrthoRay, CenterPixelOfSymmetricBoxStartsAtOrigin) {
  const auto ray = ortho_ray(2, 2, ortho(-2.5, 2.5, -2.5, 2.5, 0, 1, 5, 5));
  EXPECT_EQ(ray.origin, Eigen::Vector3d::Zero());
  EXPECT_EQ(ray.direction, Eigen::Vector3d::UnitZ());
}

TEST(OrthoRay, FirstPixelIsHalfAGsdInsideTheTopLeftCorner) {
  const auto cam = ortho(10, 20, -5, 5, 0, 1, 100, 50);
  const auto ray = ortho_ray(0, 0, cam);
  EXPECT_NEAR(ray.origin.x(), 10 + 0.05, 1e-12);
  EXPECT_NEAR(ray.origin.y(), 5 - 0.1, 1e-12);
  EXPECT_EQ(ray.origin.z(), 0.0);
}

TEST(OrthoRay, EveryPixelLooksDownTheAxis) {
  const auto cam = ortho(0, 3, 0, 2, 0, 1, 7, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x)
      EXPECT_EQ(ortho_ray(x, y, cam).direction, Eigen::Vector3d(0, 0, 1));
  EXPECT_THROW(ortho_ray(7, 0, cam), InvalidInput);
  EXPECT_THROW(ortho_ray(0, -1, cam), InvalidInput);
}

TEST(PerspectiveRay, UnitDirectionsThroughPixelCenters) {
  const auto cam = perspective(1.0, 0.75, 1, 10, 40, 30);
  const auto m = perspective_matrix(cam);
  for (int y = 0; y < 30; y += 7)
    for (int x = 0; x < 40; x += 9) {
      const auto ray = perspective_ray(x, y, cam);
      EXPECT_NEAR(ray.direction.norm(), 1.0, 1e-12);
      const Eigen::Vector2d px = ndc_to_pixel(to_ndc(m, ray.direction * 5).head<2>(), 40, 30);
      EXPECT_NEAR(px.x(), x + 0.5, 1e-9);
      EXPECT_NEAR(px.y(), y + 0.5, 1e-9);
    }
}

TEST(RaySplatIntersect, HeadOnHit) {
  const core::Splat2D s({0, 0, 5}, Eigen::Quaterniond::Identity(), {1, 1}, 1, {});
  Ray ray;
  const auto hit = ray_splat_intersect(ray, s, Pose{});
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->uv, Eigen::Vector2d::Zero());
  EXPECT_EQ(hit->gaussian_value, 1.0);
  EXPECT_EQ(hit->view_depth, 5.0);
  EXPECT_FALSE(hit->degenerate);
}

TEST(RaySplatIntersect, EdgeOnIsDegenerateWithCenterDepth) {
  // Normal along +x: the plane contains the +z ray direction.
  const core::Splat2D s({0.3, 0, 5}, Eigen::Quaterniond(Eigen::AngleAxisd(std::numbers::pi / 2, Eigen::Vector3d::UnitY())),
                        {1, 1}, 1, {});
  const auto hit = ray_splat_intersect(Ray{}, s, Pose{});
  ASSERT_TRUE(hit);
  EXPECT_TRUE(hit->degenerate);
  EXPECT_EQ(hit->view_depth, 5.0);
  EXPECT_EQ(hit->gaussian_value, 0.0);
}

TEST(RaySplatIntersect, OutsideDepthRangeIsAMiss) {
  const core::Splat2D s({0, 0, 5}, Eigen::Quaterniond::Identity(), {1, 1}, 1, {});
  EXPECT_FALSE(ray_splat_intersect(Ray{}, s, Pose{}, DepthRange{6, 10}));
  EXPECT_FALSE(ray_splat_intersect(Ray{}, s, Pose{}, DepthRange{0, 4}));
  EXPECT_TRUE(ray_splat_intersect(Ray{}, s, Pose{}, DepthRange{5, 5}));
}

TEST(RaySplatIntersect, RandomPairsMatchRayPlaneOracle) {
  Rng rng(12);
  int checked = 0;
  while (checked < 1000) {
    const auto pose = random_pose(rng, 5);
    const auto s = random_splat(rng, Eigen::Vector3d::Constant(-5), Eigen::Vector3d::Constant(5),
                                0.2, 2, std::numbers::pi);
    Ray ray;
    ray.origin = random_point(rng, Eigen::Vector3d::Constant(-3), Eigen::Vector3d::Constant(3));
    ray.direction = random_quaternion(rng) * Eigen::Vector3d::UnitZ();
    // Everything in view space for the oracle.
    const Eigen::Matrix3d r = pose.linear * s.rotation.toRotationMatrix();
    const Eigen::Vector3d mu = pose.to_view(s.center);
    if (std::abs(r.col(2).dot(ray.direction)) < 0.1)
      continue;
    Eigen::Matrix3d a;
    a.col(0) = ray.direction;
    a.col(1) = -s.scales.x() * r.col(0);
    a.col(2) = -s.scales.y() * r.col(1);
    const Eigen::Vector3d sol = a.fullPivLu().solve(mu - ray.origin);
    const auto hit = ray_splat_intersect(ray, s, pose);
    ASSERT_TRUE(hit);
    EXPECT_NEAR(hit->uv.x(), sol[1], 1e-10);
    EXPECT_NEAR(hit->uv.y(), sol[2], 1e-10);
    EXPECT_NEAR(hit->view_depth, (ray.origin + sol[0] * ray.direction).z(), 1e-10);
    EXPECT_NEAR(hit->gaussian_value, std::exp(-0.5 * (sol[1] * sol[1] + sol[2] * sol[2])), 1e-10);
    ++checked;
  }
}

TEST(ProjectCenter, VolumeCenterAndTopLeftCorner) {
  const auto cam = ortho(-4, 4, -3, 3, 0, 10, 80, 60);
  EXPECT_LT((project_point({0, 0, 5}, cam).pixel - Eigen::Vector2d(40, 30)).norm(), 1e-12);
  EXPECT_LT((project_point({-4, 3, 5}, cam).pixel - Eigen::Vector2d(0, 0)).norm(), 1e-12);
  EXPECT_TRUE(project_point({0, 0, 5}, cam).in_view);
  EXPECT_FALSE(project_point({0, 0, 11}, cam).in_view);
}

TEST(ProjectCenter, RandomPointsMatchMatrixComposition) {
  Rng rng(13);
  for (int i = 0; i < 500; ++i) {
    const auto pose = random_pose(rng, 10);
    const auto cam = ortho(-5, 7, -4, 6, 0.5, 30, 120, 100, pose);
    const Eigen::Vector3d p = random_point(rng, Eigen::Vector3d::Constant(-10), Eigen::Vector3d::Constant(10));
    Eigen::Matrix4d w = Eigen::Matrix4d::Identity();
    w.block<3, 3>(0, 0) = pose.linear;
    w.block<3, 1>(0, 3) = pose.translation;
    const Eigen::Vector4d clip = ortho_matrix(cam) * w * p.homogeneous();
    const Eigen::Vector2d expected((clip.x() + 1) / 2 * 120, (clip.y() + 1) / 2 * 100);
    EXPECT_LT((project_point(p, cam).pixel - expected).norm(), 1e-9);
  }
}

TEST(ProjectCenter, OrthoCenterFallsInThePixelOfTheNearestRay) {
  Rng rng(14);
  const auto cam = ortho(0, 10, 0, 8, 0, 20, 50, 40, nadir_pose({0, 0, 20}));
  for (int i = 0; i < 500; ++i) {
    const Eigen::Vector3d p(uniform(rng, 0.01, 9.99), uniform(rng, 0.01, 7.99), uniform(rng, 1, 19));
    const Eigen::Vector2d px = project_point(p, cam).pixel;
    const int ix = static_cast<int>(px.x()), iy = static_cast<int>(px.y());
    const Eigen::Vector3d foot = cam.pose.to_view(p);
    double best = 1e300;
    int bx = -1, by = -1;
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 50; ++x) {
        const double d = (ortho_ray(x, y, cam).origin.head<2>() - foot.head<2>()).squaredNorm();
        if (d < best)
          best = d, bx = x, by = y;
      }
    EXPECT_EQ(ix, bx);
    EXPECT_EQ(iy, by);
  }
}

TEST(OrthoProjection, ShiftAlongAxisChangesOnlyDepth) {
  Rng rng(15);
  const auto cam = ortho(-5, 5, -5, 5, 0, 100, 32, 32, nadir_pose({0, 0, 50}));
  for (int i = 0; i < 200; ++i) {
    const auto s = random_splat(rng, {-3, -3, 0}, {3, 3, 10}, 0.5, 2, 1.2);
    core::Splat2D moved = s;
    const double dz = uniform(rng, -5, 5);
    moved.center.z() += dz; // world up is view -z for a nadir camera
    const auto ray = ortho_ray(static_cast<int>(uniform(rng, 0, 32)), static_cast<int>(uniform(rng, 0, 32)), cam);
    const auto a = ray_splat_intersect(ray, s, cam.pose);
    const auto b = ray_splat_intersect(ray, moved, cam.pose);
    ASSERT_TRUE(a && b);
    EXPECT_LT((a->uv - b->uv).norm(), 1e-9);
    EXPECT_NEAR(b->view_depth - a->view_depth, -dz, 1e-9);
    EXPECT_LT((project_point(s.center, cam).pixel - project_point(moved.center, cam).pixel).norm(), 1e-9);
  }
}

TEST(Pose, ImproperOrthonormalPosesAreAccepted) {
  EXPECT_NO_THROW(nadir_pose({1, 2, 3}).validate());
  Pose bad;
  bad.linear(0, 0) = 2.0;
  EXPECT_THROW(bad.validate(), InvalidInput);
}
