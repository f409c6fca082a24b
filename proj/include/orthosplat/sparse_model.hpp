#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "orthosplat/projection.hpp"

namespace orthosplat {

/// One registered image: id, pose and pinhole intrinsics (pose lives in `camera.pose`).
struct CameraRecord {
  int id = 0;
  projection::PerspectiveCamera camera;
  std::string image_path;
  /// COLMAP camera (intrinsics) id and pinhole parameters (fx, fy, cx, cy) as read.
  int intrinsics_id = 1;
  std::string camera_model = "PINHOLE";
  Eigen::Vector4d pinhole = Eigen::Vector4d::Zero();

  const projection::Pose &pose() const { return camera.pose; }
};

struct SparsePoint {
  Eigen::Vector3d xyz = Eigen::Vector3d::Zero();
  std::array<std::uint8_t, 3> rgb{0, 0, 0};
  /// Ids of the cameras that observe this point.
  std::vector<int> track;
};

struct SparseModel {
  std::vector<CameraRecord> cameras;
  std::vector<SparsePoint> points;

  /// Throws SchemaError when a track references an unknown camera.
  void validate() const;
};

} // namespace orthosplat
