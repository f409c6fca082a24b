#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace orthosplat::core {

inline constexpr double kShC0 = 0.28209479177387814;
inline constexpr int kMaxShDegree = 3;

constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

/// Real spherical-harmonic RGB coefficients, ordered by band then m, one RGB triple per basis
/// function. Degree 0 carries the single DC term.
struct ShCoeffs {
  int degree = 0;
  std::vector<Eigen::Vector3d> coeffs{Eigen::Vector3d::Zero()};

  ShCoeffs() = default;
  ShCoeffs(int degree, std::vector<Eigen::Vector3d> coeffs);

  /// DC-only coefficients producing `rgb` (linear) under the +0.5 offset convention.
  static ShCoeffs from_rgb(const Eigen::Vector3d &rgb);
};

/// One oriented 2D Gaussian disk. Construction normalizes the quaternion and validates the
/// remaining invariants; callers mutating fields directly must keep them.
struct Splat2D {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector2d scales = Eigen::Vector2d::Ones();
  double opacity = 1.0;
  ShCoeffs sh;

  Splat2D() = default;
  Splat2D(const Eigen::Vector3d &center, const Eigen::Quaterniond &rotation,
          const Eigen::Vector2d &scales, double opacity, ShCoeffs sh);
};

struct Aabb {
  Eigen::Vector3d min = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d max = Eigen::Vector3d::Constant(-std::numeric_limits<double>::infinity());

  bool empty() const { return (min.array() > max.array()).any(); }
  void extend(const Eigen::Vector3d &p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  bool contains(const Eigen::Vector3d &p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  Eigen::Vector3d extent() const { return max - min; }
};

/// Splat collection stored field-by-field. All splats share one SH degree; lower-degree
/// splats are zero-padded on insertion.
class SplatScene {
public:
  SplatScene() = default;
  explicit SplatScene(int sh_degree);

  std::size_t size() const { return centers_.size(); }
  bool empty() const { return centers_.empty(); }
  int sh_degree() const { return sh_degree_; }
  int sh_stride() const { return sh_coeff_count(sh_degree_); }

  void reserve(std::size_t n);
  void push_back(const Splat2D &splat);
  Splat2D splat(std::size_t i) const;
  void set(std::size_t i, const Splat2D &splat);

  std::span<const Eigen::Vector3d> centers() const { return centers_; }
  std::span<const Eigen::Quaterniond> rotations() const { return rotations_; }
  std::span<const Eigen::Vector2d> scales() const { return scales_; }
  std::span<const double> opacities() const { return opacities_; }
  /// `sh_stride()` consecutive entries per splat.
  std::span<const Eigen::Vector3d> sh() const { return sh_; }
  std::span<const Eigen::Vector3d> sh_of(std::size_t i) const {
    return std::span<const Eigen::Vector3d>(sh_).subspan(i * sh_stride(), sh_stride());
  }

  /// Box around every splat center; recomputed after `set`.
  const Aabb &bounds() const { return bounds_; }

  std::string crs_note = "local metric frame";

private:
  void recompute_bounds();

  int sh_degree_ = 0;
  std::vector<Eigen::Vector3d> centers_;
  std::vector<Eigen::Quaterniond> rotations_;
  std::vector<Eigen::Vector2d> scales_;
  std::vector<double> opacities_;
  std::vector<Eigen::Vector3d> sh_;
  Aabb bounds_;
};

/// Columns are the splat tangents t_u, t_v and the normal t_w. Non-unit input is normalized.
Eigen::Matrix3d rotation_matrix(const Eigen::Quaterniond &q);

/// Inverse of rotation_matrix, canonicalized to w >= 0.
Eigen::Quaterniond quaternion_from_matrix(const Eigen::Matrix3d &r);

/// Homogeneous local-to-world transform: H * (u, v, 1, 1)^T = mu + s_u t_u u + s_v t_v v.
Eigen::Matrix4d splat_to_world(const Splat2D &splat);

inline double gaussian_uv(double u, double v) { return std::exp(-0.5 * (u * u + v * v)); }

/// View-dependent color: real SH basis up to degree 3, +0.5 offset, clamped at 0.
Eigen::Vector3d eval_sh(std::span<const Eigen::Vector3d> coeffs, int degree,
                        const Eigen::Vector3d &dir);
inline Eigen::Vector3d eval_sh(const ShCoeffs &sh, const Eigen::Vector3d &dir) {
  return eval_sh(sh.coeffs, sh.degree, dir);
}

/// Raw basis values Y_k(dir) for k < sh_coeff_count(degree).
void sh_basis(int degree, const Eigen::Vector3d &dir, std::span<double> out);

} // namespace orthosplat::core
