#include "orthosplat/alignment.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "orthosplat/error.hpp"

namespace orthosplat::io {

void AlignmentTransform::validate() const {
  const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity())
                           .cwiseAbs()
                           .maxCoeff();
  if (ortho > 1e-9 || std::abs(rotation.determinant() - 1.0) > 1e-9)
    throw InvalidInput("alignment rotation must be orthonormal with determinant +1");
  if (!translation.allFinite())
    throw InvalidInput("alignment translation is not finite");
}

SparseModel apply_alignment(const SparseModel &model, const AlignmentTransform &transform) {
  transform.validate();
  const Eigen::Matrix3d &r = transform.rotation;
  const Eigen::Vector3d &t = transform.translation;
  SparseModel out = model;
  for (auto &p : out.points)
    p.xyz = r * p.xyz + t;
  for (auto &c : out.cameras) {
    // view = L x + b = L R^T (x' - t) + b
    auto &pose = c.camera.pose;
    const Eigen::Matrix3d linear = pose.linear * r.transpose();
    pose.translation = pose.translation - linear * t;
    pose.linear = linear;
  }
  return out;
}

core::SplatScene apply_alignment(const core::SplatScene &scene,
                                 const AlignmentTransform &transform) {
  transform.validate();
  const Eigen::Quaterniond qr(transform.rotation);
  core::SplatScene out(scene.sh_degree());
  out.crs_note = scene.crs_note;
  out.reserve(scene.size());
  for (std::size_t i = 0; i < scene.size(); ++i) {
    core::Splat2D s = scene.splat(i);
    s.center = transform.rotation * s.center + transform.translation;
    s.rotation = (qr * s.rotation).normalized();
    // SH coefficients stay in the original frame; higher bands would need rotating.
    out.push_back(s);
  }
  return out;
}

std::pair<SparseModel, AlignmentTransform>
manhattan_align(const SparseModel &model,
                const std::optional<AlignmentTransform> &override_transform) {
  if (override_transform) {
    AlignmentTransform t = *override_transform;
    t.provenance = AlignmentTransform::Provenance::UserSupplied;
    return {apply_alignment(model, t), t};
  }
  if (model.cameras.size() < 3)
    throw InvalidInput("automatic Manhattan alignment needs at least 3 cameras");

  AlignmentTransform result;
  result.provenance = AlignmentTransform::Provenance::Auto;

  Eigen::Vector3d mean_forward = Eigen::Vector3d::Zero();
  for (const auto &c : model.cameras)
    mean_forward += c.pose().forward().normalized();
  if (!(mean_forward.norm() > 1e-12))
    throw InvalidInput("camera viewing directions cancel out; supply an alignment override");
  mean_forward.normalize();
  const Eigen::Vector3d up = -mean_forward;
  const Eigen::Matrix3d level =
      Eigen::Quaterniond::FromTwoVectors(up, Eigen::Vector3d::UnitZ()).toRotationMatrix();

  double max_spread = 0.0;
  for (const auto &c : model.cameras) {
    const double cosang = std::clamp(c.pose().forward().normalized().dot(mean_forward), -1.0, 1.0);
    max_spread = std::max(max_spread, std::acos(cosang));
  }

  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  std::vector<Eigen::Vector2d> ground;
  for (const auto &c : model.cameras) {
    ground.push_back((level * c.pose().center()).head<2>());
    mean += ground.back();
  }
  mean /= static_cast<double>(ground.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto &g : ground)
    cov += (g - mean) * (g - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  const double lmin = eig.eigenvalues()[0], lmax = eig.eigenvalues()[1];

  const double one_degree = std::numbers::pi / 180.0;
  const bool collinear = lmin <= 1e-9 * lmax;
  const bool isotropic = lmax <= 0.0 || lmin >= 0.999 * lmax;
  Eigen::Matrix3d spin = Eigen::Matrix3d::Identity();
  if ((collinear && max_spread < one_degree) || isotropic) {
    result.warnings.push_back(
        "camera layout does not fix a ground orientation; aligned the up axis only");
  } else {
    const Eigen::Vector2d axis = eig.eigenvectors().col(1);
    double angle = std::atan2(axis.y(), axis.x());
    if (angle > std::numbers::pi / 2)
      angle -= std::numbers::pi;
    else if (angle <= -std::numbers::pi / 2)
      angle += std::numbers::pi;
    spin = Eigen::AngleAxisd(-angle, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  }
  result.rotation = spin * level;
  return {apply_alignment(model, result), result};
}

} // namespace orthosplat::io
