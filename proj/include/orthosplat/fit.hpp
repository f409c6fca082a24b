#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "orthosplat/core.hpp"
#include "orthosplat/image.hpp"
#include "orthosplat/projection.hpp"
#include "orthosplat/rasterizer.hpp"

namespace orthosplat::fit {

enum class ParamGroup { Position, ScaleLog, Rotation, OpacityLogit, Color };
enum class GradientMode { FiniteDifference, AnalyticWhereAvailable };

inline constexpr ParamGroup kAllGroups[] = {ParamGroup::Position, ParamGroup::ScaleLog,
                                            ParamGroup::Rotation, ParamGroup::OpacityLogit,
                                            ParamGroup::Color};

const char *group_name(ParamGroup group);
ParamGroup group_from_name(const std::string &name);

struct LearningRates {
  double position = 1e-2;
  double scale_log = 1e-2;
  double rotation = 1e-2;
  double opacity_logit = 5e-2;
  double color = 2e-2;

  double of(ParamGroup group) const;
};

struct FitConfig {
  int iterations = 200;
  LearningRates learning_rates;
  std::vector<ParamGroup> groups{std::begin(kAllGroups), std::end(kAllGroups)};
  GradientMode gradient_mode = GradientMode::AnalyticWhereAvailable;
  /// Central-difference steps: meters for positions, parameter units elsewhere.
  double position_eps = 1e-4;
  double param_eps = 1e-3;
  /// Adam moments.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Learning rates decay geometrically to this fraction at the last iteration.
  double final_lr_fraction = 0.1;
  Eigen::Vector3d background = Eigen::Vector3d::Ones();
  int threads = 1;

  void validate() const;
  double eps_for(ParamGroup group) const;
};

/// A camera and the linear RGB image it should see.
struct View {
  projection::Camera camera;
  Image<double> target;
};

/// Mean absolute error over all RGB samples.
double photometric_loss(const raster::FrameBuffer &rendered, const Image<double> &target);
double photometric_loss(const Image<double> &rendered, const Image<double> &target);

/// One scalar parameter in optimization space. Color components index SH coefficient k and
/// channel c as 3 * k + c; rotation components are w, x, y, z.
struct ParamRef {
  std::size_t splat = 0;
  ParamGroup group = ParamGroup::Position;
  int component = 0;
};

int component_count(ParamGroup group, int sh_degree);
double get_param(const core::SplatScene &scene, const ParamRef &ref);
/// Writes the parameter back, renormalizing the quaternion for rotation components.
void set_param(core::SplatScene &scene, const ParamRef &ref, double value);

struct FdGradient {
  double value = 0.0;
  /// The parameter sat on its domain boundary (opacity 0 or 1) and a one-sided difference
  /// into the interior was taken.
  bool one_sided = false;
};

/// (L(theta + eps) - L(theta - eps)) / (2 eps) through full renders.
FdGradient finite_diff_gradient(const core::SplatScene &scene, const projection::Camera &camera,
                                const Image<double> &target, const ParamRef &ref, double eps,
                                const Eigen::Vector3d &background = Eigen::Vector3d::Ones());
FdGradient finite_diff_gradient(const core::SplatScene &scene, std::span<const View> views,
                                const ParamRef &ref, double eps,
                                const Eigen::Vector3d &background = Eigen::Vector3d::Ones());

/// Exact gradients of the L1 loss for the parameters that enter blending smoothly.
struct AnalyticGradient {
  double loss = 0.0;
  std::vector<double> opacity_logit;      ///< one per splat
  std::vector<Eigen::Vector3d> color;     ///< sh_stride() per splat
};
AnalyticGradient analytic_gradient(const core::SplatScene &scene,
                                   const projection::Camera &camera, const Image<double> &target,
                                   const Eigen::Vector3d &background = Eigen::Vector3d::Ones());

class FitDiverged : public std::runtime_error {
public:
  FitDiverged(int iteration, const std::string &what)
      : std::runtime_error(what), iteration_(iteration) {}
  int iteration() const { return iteration_; }

private:
  int iteration_;
};

struct FitResult {
  core::SplatScene scene;
  /// Loss before each update, then the final loss: iterations + 1 entries.
  std::vector<double> loss_trace;
};

FitResult fit(const core::SplatScene &init, std::span<const View> views, const FitConfig &config);

std::string loss_trace_csv(const std::vector<double> &trace);

} // namespace orthosplat::fit
