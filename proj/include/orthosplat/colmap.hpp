#pragma once

#include <filesystem>

#include "orthosplat/sparse_model.hpp"

namespace orthosplat::io {

/// Reads cameras.txt, images.txt and points3D.txt. PINHOLE and SIMPLE_PINHOLE cameras map to
/// symmetric PerspectiveCamera fields of view; the principal point is kept for writing only.
SparseModel read_colmap_sparse(const std::filesystem::path &dir);
void write_colmap_sparse(const SparseModel &model, const std::filesystem::path &dir);

/// COLMAP's own world-to-camera transform (x right, y down) for a parsed record.
projection::Pose colmap_world_to_camera(const CameraRecord &record);
/// Converts a COLMAP world-to-camera transform into this library's image-oriented pose.
projection::Pose pose_from_colmap(const Eigen::Quaterniond &q, const Eigen::Vector3d &t);

} // namespace orthosplat::io
