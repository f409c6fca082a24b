#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "orthosplat/core.hpp"
#include "orthosplat/error.hpp"
#include "support.hpp"

using namespace orthosplat;
using namespace orthosplat::core;
using namespace testing_support;

namespace {

// Textbook unit-quaternion to matrix expansion.
Eigen::Matrix3d quat_matrix_oracle(double w, double x, double y, double z) {
  Eigen::Matrix3d m;
  m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return m;
}

} // namespace

TEST(RotationMatrix, IdentityQuaternion) {
  EXPECT_TRUE(rotation_matrix(Eigen::Quaterniond::Identity()).isApprox(Eigen::Matrix3d::Identity(), 0));
}

TEST(RotationMatrix, QuarterTurnAboutZ) {
  const double h = std::sqrt(0.5);
  const Eigen::Matrix3d r = rotation_matrix(Eigen::Quaterniond(h, 0, 0, h));
  EXPECT_NEAR((r.col(0) - Eigen::Vector3d(0, 1, 0)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((r.col(1) - Eigen::Vector3d(-1, 0, 0)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((r.col(2) - Eigen::Vector3d(0, 0, 1)).norm(), 0.0, 1e-15);
}

TEST(RotationMatrix, ZeroQuaternionRejected) {
  EXPECT_THROW(rotation_matrix(Eigen::Quaterniond(0, 0, 0, 0)), InvalidInput);
}

TEST(RotationMatrix, RandomQuaternionsAreOrthonormalAndMatchExpansion) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto q = random_quaternion(rng);
    const Eigen::Matrix3d r = rotation_matrix(q);
    EXPECT_LT((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
    EXPECT_LT((r - quat_matrix_oracle(q.w(), q.x(), q.y(), q.z())).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((r.col(0).cross(r.col(1)) - r.col(2)).norm(), 1e-9);
  }
}

TEST(RotationMatrix, UnnormalizedInputIsNormalized) {
  const Eigen::Quaterniond q(2.0, 0.0, 0.0, 2.0);
  const double h = std::sqrt(0.5);
  EXPECT_LT((rotation_matrix(q) - rotation_matrix(Eigen::Quaterniond(h, 0, 0, h))).norm(), 1e-15);
}

TEST(RotationMatrix, RoundTripThroughMatrixRecoversQuaternionUpToSign) {
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const auto q = random_quaternion(rng);
    const auto back = quaternion_from_matrix(rotation_matrix(q));
    EXPECT_GE(back.w(), 0.0);
    const double same = (back.coeffs() - q.coeffs()).cwiseAbs().maxCoeff();
    const double flipped = (back.coeffs() + q.coeffs()).cwiseAbs().maxCoeff();
    EXPECT_LT(std::min(same, flipped), 1e-9);
  }
}

TEST(Splat2D, ConstructionNormalizesAndValidates) {
  const Splat2D s({0, 0, 0}, Eigen::Quaterniond(0, 0, 0, 3), {1, 2}, 0.5, ShCoeffs{});
  EXPECT_NEAR(s.rotation.norm(), 1.0, 1e-12);
  EXPECT_THROW(Splat2D({0, 0, 0}, Eigen::Quaterniond(0, 0, 0, 0), {1, 1}, 0.5, ShCoeffs{}),
               InvalidInput);
  EXPECT_THROW(Splat2D({0, 0, 0}, Eigen::Quaterniond::Identity(), {0, 1}, 0.5, ShCoeffs{}),
               InvalidInput);
  EXPECT_THROW(Splat2D({0, 0, 0}, Eigen::Quaterniond::Identity(), {1, -1}, 0.5, ShCoeffs{}),
               InvalidInput);
  EXPECT_THROW(Splat2D({0, 0, 0}, Eigen::Quaterniond::Identity(), {1, 1}, 1.5, ShCoeffs{}),
               InvalidInput);
  EXPECT_THROW(Splat2D({0, 0, 0}, Eigen::Quaterniond::Identity(), {1, 1}, -0.1, ShCoeffs{}),
               InvalidInput);
  EXPECT_NO_THROW(Splat2D({0, 0, 0}, Eigen::Quaterniond::Identity(), {1, 1}, 0.0, ShCoeffs{}));
  EXPECT_NO_THROW(Splat2D({0, 0, 0}, Eigen::Quaterniond::Identity(), {1, 1}, 1.0, ShCoeffs{}));
}

TEST(SplatToWorld, IdentityFrame) {
  const Splat2D s({0, 0, 0}, Eigen::Quaterniond::Identity(), {1, 1}, 1.0, ShCoeffs{});
  Eigen::Matrix4d expected;
  expected << 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1;
  EXPECT_EQ(splat_to_world(s), expected);
}

TEST(SplatToWorld, ShiftedScaledPoint) {
  const Splat2D s({5, 0, 0}, Eigen::Quaterniond::Identity(), {2, 1}, 1.0, ShCoeffs{});
  const Eigen::Vector4d p = splat_to_world(s) * Eigen::Vector4d(1, 0, 1, 1);
  EXPECT_EQ(p, Eigen::Vector4d(7, 0, 0, 1));
}

TEST(SplatToWorld, RandomSplatsMatchDirectFormulaAndLieOnPlane) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto s = random_splat(rng, Eigen::Vector3d::Constant(-10), Eigen::Vector3d::Constant(10),
                                0.1, 3.0, std::numbers::pi);
    const Eigen::Matrix3d r = quat_matrix_oracle(s.rotation.w(), s.rotation.x(), s.rotation.y(),
                                                 s.rotation.z());
    const double u = uniform(rng, -3, 3), v = uniform(rng, -3, 3);
    const Eigen::Vector4d h = splat_to_world(s) * Eigen::Vector4d(u, v, 1, 1);
    const Eigen::Vector3d direct =
        s.center + s.scales.x() * r.col(0) * u + s.scales.y() * r.col(1) * v;
    EXPECT_LT((h.head<3>() - direct).norm(), 1e-12);
    EXPECT_EQ(h.w(), 1.0);
    EXPECT_LT(std::abs(r.col(2).dot(h.head<3>() - s.center)), 1e-9);
  }
}

TEST(GaussianUv, PeakAndUnitOffset) {
  EXPECT_EQ(gaussian_uv(0, 0), 1.0);
  EXPECT_NEAR(gaussian_uv(1, 0), 0.6065306597126334, 1e-15);
}

TEST(GaussianUv, SymmetricAndMonotone) {
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const double u = uniform(rng, -5, 5), v = uniform(rng, -5, 5);
    EXPECT_EQ(gaussian_uv(u, v), gaussian_uv(-u, -v));
    const double k = uniform(rng, 1.0, 2.0);
    EXPECT_GE(gaussian_uv(u, v), gaussian_uv(k * u, k * v));
    EXPECT_GT(gaussian_uv(u, v), 0.0);
  }
}

TEST(EvalSh, DegreeZeroIsDirectionIndependent) {
  const ShCoeffs sh(0, {Eigen::Vector3d(0.3, -0.2, 1.1)});
  EXPECT_EQ(eval_sh(sh, {0, 0, 1}), eval_sh(sh, Eigen::Vector3d(1, 2, 3).normalized()));
  EXPECT_NEAR(eval_sh(sh, {0, 0, 1}).x(), 0.3 * 0.28209479177387814 + 0.5, 1e-15);
}

TEST(EvalSh, ZeroCoefficientsGiveHalfGray) {
  for (int d = 0; d <= 3; ++d) {
    const ShCoeffs sh(d, std::vector<Eigen::Vector3d>(sh_coeff_count(d), Eigen::Vector3d::Zero()));
    EXPECT_EQ(eval_sh(sh, {0, 1, 0}), Eigen::Vector3d::Constant(0.5));
  }
}

TEST(EvalSh, ClampsAtZero) {
  const ShCoeffs sh(0, {Eigen::Vector3d(-10, 0, 10)});
  const auto c = eval_sh(sh, {0, 0, 1});
  EXPECT_EQ(c.x(), 0.0);
  EXPECT_EQ(c.y(), 0.5);
}

TEST(EvalSh, DegreeOneIsOddUnderDirectionFlip) {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    std::vector<Eigen::Vector3d> c(4);
    c[0] = Eigen::Vector3d::Constant(2.0); // keeps both colors above the clamp
    for (int k = 1; k < 4; ++k)
      c[k] = Eigen::Vector3d(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    const ShCoeffs sh(1, c);
    const Eigen::Vector3d dir = random_quaternion(rng) * Eigen::Vector3d::UnitZ();
    const ShCoeffs dc_only(0, {c[0]});
    const Eigen::Vector3d l1 = eval_sh(sh, dir) - eval_sh(dc_only, dir);
    EXPECT_LT(((eval_sh(sh, dir) - eval_sh(sh, -dir)) - 2.0 * l1).norm(), 1e-12);
  }
}

TEST(EvalSh, BasisIsOrthonormalOnTheSphere) {
  // Midpoint quadrature in (cos theta, phi), which is area-uniform.
  const int n = 400;
  std::vector<std::array<double, 16>> samples;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double z = -1.0 + (i + 0.5) * 2.0 / n;
      const double phi = (j + 0.5) * 2.0 * std::numbers::pi / n;
      const double r = std::sqrt(1 - z * z);
      std::array<double, 16> b{};
      sh_basis(3, {r * std::cos(phi), r * std::sin(phi), z}, b);
      samples.push_back(b);
    }
  const double w = 4.0 * std::numbers::pi / (n * n);
  for (int a = 0; a < 16; ++a)
    for (int b = 0; b < 16; ++b) {
      double s = 0;
      for (const auto &v : samples)
        s += v[a] * v[b] * w;
      EXPECT_NEAR(s, a == b ? 1.0 : 0.0, 2e-4) << a << "," << b;
    }
}

TEST(EvalSh, UnsupportedDegreeRejected) {
  EXPECT_THROW(ShCoeffs(4, std::vector<Eigen::Vector3d>(25)), InvalidInput);
  EXPECT_THROW(ShCoeffs(1, std::vector<Eigen::Vector3d>(3)), InvalidInput);
}

TEST(SplatScene, BoundsContainEveryCenterAndTrackUpdates) {
  Rng rng(6);
  SplatScene scene = random_scene(rng, 50, {-5, -5, 0}, {5, 5, 2}, 0.1, 0.5);
  for (const auto &c : scene.centers())
    EXPECT_TRUE(scene.bounds().contains(c));
  auto s = scene.splat(7);
  s.center = {100, 0, 0};
  scene.set(7, s);
  EXPECT_EQ(scene.bounds().max.x(), 100.0);
}

TEST(SplatScene, LowerDegreeSplatsArePadded) {
  SplatScene scene(2);
  scene.push_back(Splat2D({0, 0, 0}, Eigen::Quaterniond::Identity(), {1, 1}, 1.0,
                          ShCoeffs::from_rgb({0.2, 0.4, 0.6})));
  ASSERT_EQ(scene.sh_of(0).size(), 9u);
  for (int k = 1; k < 9; ++k)
    EXPECT_EQ(scene.sh_of(0)[k], Eigen::Vector3d::Zero());
  EXPECT_LT((eval_sh(scene.sh_of(0), 2, {0, 0, 1}) - Eigen::Vector3d(0.2, 0.4, 0.6)).norm(), 1e-15);
  SplatScene low(0);
  EXPECT_THROW(low.push_back(scene.splat(0)), InvalidInput);
}
