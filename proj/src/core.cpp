#include "orthosplat/core.hpp"

#include <array>
#include <cmath>

#include "orthosplat/error.hpp"

namespace orthosplat::core {

namespace {

constexpr double kShC1 = 0.4886025119029199;
constexpr std::array<double, 5> kShC2 = {1.0925484305920792, -1.0925484305920792,
                                         0.31539156525252005, -1.0925484305920792,
                                         0.5462742152960396};
constexpr std::array<double, 7> kShC3 = {-0.5900435899266435, 2.890611442640554,
                                         -0.4570457994644658, 0.3731763325901154,
                                         -0.4570457994644658, 1.445305721320277,
                                         -0.5900435899266435};

void check_degree(int degree) {
  if (degree < 0 || degree > kMaxShDegree)
    throw InvalidInput("unsupported SH degree " + std::to_string(degree));
}

} // namespace

ShCoeffs::ShCoeffs(int degree_, std::vector<Eigen::Vector3d> coeffs_)
    : degree(degree_), coeffs(std::move(coeffs_)) {
  check_degree(degree);
  if (static_cast<int>(coeffs.size()) != sh_coeff_count(degree))
    throw InvalidInput("SH degree " + std::to_string(degree) + " needs " +
                       std::to_string(sh_coeff_count(degree)) + " coefficients, got " +
                       std::to_string(coeffs.size()));
}

ShCoeffs ShCoeffs::from_rgb(const Eigen::Vector3d &rgb) {
  return ShCoeffs(0, {(rgb.array() - 0.5) / kShC0});
}

Splat2D::Splat2D(const Eigen::Vector3d &center_, const Eigen::Quaterniond &rotation_,
                 const Eigen::Vector2d &scales_, double opacity_, ShCoeffs sh_)
    : center(center_), rotation(rotation_), scales(scales_), opacity(opacity_),
      sh(std::move(sh_)) {
  const double norm = rotation.norm();
  if (!(norm > 0.0) || !std::isfinite(norm))
    throw InvalidInput("splat rotation quaternion has zero or non-finite norm");
  rotation.coeffs() /= norm;
  if (!center.allFinite())
    throw InvalidInput("splat center is not finite");
  if (!(scales.x() > 0.0 && scales.y() > 0.0) || !scales.allFinite())
    throw InvalidInput("splat scales must be strictly positive");
  if (!(opacity >= 0.0 && opacity <= 1.0))
    throw InvalidInput("splat opacity must lie in [0, 1]");
  check_degree(sh.degree);
}

SplatScene::SplatScene(int sh_degree) : sh_degree_(sh_degree) { check_degree(sh_degree); }

void SplatScene::reserve(std::size_t n) {
  centers_.reserve(n);
  rotations_.reserve(n);
  scales_.reserve(n);
  opacities_.reserve(n);
  sh_.reserve(n * sh_stride());
}

void SplatScene::push_back(const Splat2D &splat) {
  if (splat.sh.degree > sh_degree_)
    throw InvalidInput("splat SH degree " + std::to_string(splat.sh.degree) +
                       " exceeds scene degree " + std::to_string(sh_degree_));
  centers_.push_back(splat.center);
  rotations_.push_back(splat.rotation);
  scales_.push_back(splat.scales);
  opacities_.push_back(splat.opacity);
  for (int k = 0; k < sh_stride(); ++k)
    sh_.push_back(k < static_cast<int>(splat.sh.coeffs.size()) ? splat.sh.coeffs[k]
                                                               : Eigen::Vector3d::Zero());
  bounds_.extend(splat.center);
}

Splat2D SplatScene::splat(std::size_t i) const {
  Splat2D s;
  s.center = centers_[i];
  s.rotation = rotations_[i];
  s.scales = scales_[i];
  s.opacity = opacities_[i];
  auto coeffs = sh_of(i);
  s.sh = ShCoeffs(sh_degree_, {coeffs.begin(), coeffs.end()});
  return s;
}

void SplatScene::set(std::size_t i, const Splat2D &splat) {
  if (splat.sh.degree > sh_degree_)
    throw InvalidInput("splat SH degree exceeds scene degree");
  centers_[i] = splat.center;
  rotations_[i] = splat.rotation;
  scales_[i] = splat.scales;
  opacities_[i] = splat.opacity;
  for (int k = 0; k < sh_stride(); ++k)
    sh_[i * sh_stride() + k] = k < static_cast<int>(splat.sh.coeffs.size())
                                   ? splat.sh.coeffs[k]
                                   : Eigen::Vector3d::Zero();
  recompute_bounds();
}

void SplatScene::recompute_bounds() {
  bounds_ = Aabb{};
  for (const auto &c : centers_)
    bounds_.extend(c);
}

Eigen::Matrix3d rotation_matrix(const Eigen::Quaterniond &q) {
  const double norm = q.norm();
  if (!(norm > 0.0) || !std::isfinite(norm))
    throw InvalidInput("cannot build a rotation from a zero quaternion");
  return Eigen::Quaterniond(q.coeffs() / norm).toRotationMatrix();
}

Eigen::Quaterniond quaternion_from_matrix(const Eigen::Matrix3d &r) {
  Eigen::Quaterniond q(r);
  q.normalize();
  if (q.w() < 0.0)
    q.coeffs() *= -1.0;
  return q;
}

Eigen::Matrix4d splat_to_world(const Splat2D &splat) {
  const Eigen::Matrix3d r = rotation_matrix(splat.rotation);
  Eigen::Matrix4d h = Eigen::Matrix4d::Zero();
  h.block<3, 1>(0, 0) = splat.scales.x() * r.col(0);
  h.block<3, 1>(0, 1) = splat.scales.y() * r.col(1);
  h.block<3, 1>(0, 3) = splat.center;
  h(3, 3) = 1.0;
  return h;
}

void sh_basis(int degree, const Eigen::Vector3d &dir, std::span<double> out) {
  check_degree(degree);
  if (static_cast<int>(out.size()) < sh_coeff_count(degree))
    throw InvalidInput("SH basis output span too small");
  const double x = dir.x(), y = dir.y(), z = dir.z();
  out[0] = kShC0;
  if (degree < 1)
    return;
  out[1] = -kShC1 * y;
  out[2] = kShC1 * z;
  out[3] = -kShC1 * x;
  if (degree < 2)
    return;
  const double xx = x * x, yy = y * y, zz = z * z;
  const double xy = x * y, yz = y * z, xz = x * z;
  out[4] = kShC2[0] * xy;
  out[5] = kShC2[1] * yz;
  out[6] = kShC2[2] * (2.0 * zz - xx - yy);
  out[7] = kShC2[3] * xz;
  out[8] = kShC2[4] * (xx - yy);
  if (degree < 3)
    return;
  out[9] = kShC3[0] * y * (3.0 * xx - yy);
  out[10] = kShC3[1] * xy * z;
  out[11] = kShC3[2] * y * (4.0 * zz - xx - yy);
  out[12] = kShC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
  out[13] = kShC3[4] * x * (4.0 * zz - xx - yy);
  out[14] = kShC3[5] * z * (xx - yy);
  out[15] = kShC3[6] * x * (xx - 3.0 * yy);
}

Eigen::Vector3d eval_sh(std::span<const Eigen::Vector3d> coeffs, int degree,
                        const Eigen::Vector3d &dir) {
  check_degree(degree);
  const int n = sh_coeff_count(degree);
  if (static_cast<int>(coeffs.size()) < n)
    throw InvalidInput("too few SH coefficients for degree " + std::to_string(degree));
  std::array<double, 16> basis{};
  sh_basis(degree, dir, basis);
  Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
  for (int k = 0; k < n; ++k)
    rgb += basis[k] * coeffs[k];
  return (rgb.array() + 0.5).cwiseMax(0.0);
}

} // namespace orthosplat::core
