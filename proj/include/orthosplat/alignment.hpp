#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "orthosplat/core.hpp"
#include "orthosplat/sparse_model.hpp"

namespace orthosplat::io {

/// Rigid world map x' = rotation * x + translation with det(rotation) = +1.
struct AlignmentTransform {
  enum class Provenance { UserSupplied, Auto };

  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Provenance provenance = Provenance::Auto;
  std::vector<std::string> warnings;

  void validate() const;
};

SparseModel apply_alignment(const SparseModel &model, const AlignmentTransform &transform);
core::SplatScene apply_alignment(const core::SplatScene &scene,
                                 const AlignmentTransform &transform);

/// With an override, applies it. Otherwise assumes a near-nadir survey: the negated mean viewing
/// direction becomes +z, then the principal axis of the ground-projected camera centers is
/// rotated onto +x (up to 180 degrees). Falls back to the up-axis step alone, with a warning,
/// when the ground layout cannot fix an in-plane orientation.
std::pair<SparseModel, AlignmentTransform>
manhattan_align(const SparseModel &model,
                const std::optional<AlignmentTransform> &override_transform = std::nullopt);

} // namespace orthosplat::io
