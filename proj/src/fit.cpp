#include "orthosplat/fit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "orthosplat/error.hpp"
#include "orthosplat/parallel.hpp"
#include "orthosplat/ply.hpp"

namespace orthosplat::fit {

const char *group_name(ParamGroup g) {
  switch (g) {
  case ParamGroup::Position:
    return "position";
  case ParamGroup::ScaleLog:
    return "scale";
  case ParamGroup::Rotation:
    return "rotation";
  case ParamGroup::OpacityLogit:
    return "opacity";
  case ParamGroup::Color:
    return "color";
  }
  return "?";
}

ParamGroup group_from_name(const std::string &name) {
  for (ParamGroup g : kAllGroups)
    if (name == group_name(g))
      return g;
  throw InvalidInput("unknown parameter group '" + name + "'");
}

double LearningRates::of(ParamGroup g) const {
  switch (g) {
  case ParamGroup::Position:
    return position;
  case ParamGroup::ScaleLog:
    return scale_log;
  case ParamGroup::Rotation:
    return rotation;
  case ParamGroup::OpacityLogit:
    return opacity_logit;
  case ParamGroup::Color:
    return color;
  }
  return 0.0;
}

void FitConfig::validate() const {
  if (iterations < 1)
    throw InvalidInput("iterations must be at least 1");
  for (ParamGroup g : kAllGroups)
    if (!(learning_rates.of(g) > 0.0))
      throw InvalidInput(std::string("learning rate for ") + group_name(g) + " must be positive");
  if (!(position_eps > 0.0) || !(param_eps > 0.0))
    throw InvalidInput("finite-difference steps must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_eps > 0.0))
    throw InvalidInput("invalid Adam parameters");
  if (!(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0))
    throw InvalidInput("final learning-rate fraction must be in (0, 1]");
}

double FitConfig::eps_for(ParamGroup g) const {
  return g == ParamGroup::Position ? position_eps : param_eps;
}

double photometric_loss(const Image<double> &rendered, const Image<double> &target) {
  if (!rendered.same_shape(target) || target.channels() != 3)
    throw InvalidInput("rendered and target images differ in size");
  double sum = 0.0;
  for (std::size_t i = 0; i < target.data().size(); ++i)
    sum += std::abs(rendered.data()[i] - target.data()[i]);
  return target.data().empty() ? 0.0 : sum / static_cast<double>(target.data().size());
}

namespace {

Image<double> to_image(const raster::FrameBuffer &fb) {
  Image<double> img(fb.width, fb.height, 3);
  for (int y = 0; y < fb.height; ++y)
    for (int x = 0; x < fb.width; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(x, y, c) = fb.color[fb.index(x, y)][c];
  return img;
}

double view_loss(const core::SplatScene &scene, const View &view,
                 const Eigen::Vector3d &background, int threads = 1) {
  raster::RenderOptions ro;
  ro.background = background;
  ro.threads = threads;
  return photometric_loss(raster::render(scene, view.camera, ro), view.target);
}

double mean_loss(const core::SplatScene &scene, std::span<const View> views,
                 const Eigen::Vector3d &background, int threads = 1) {
  std::vector<double> losses(views.size());
  parallel_for(views.size(), threads,
               [&](std::size_t v) { losses[v] = view_loss(scene, views[v], background); });
  double sum = 0.0;
  for (double l : losses)
    sum += l;
  return sum / static_cast<double>(views.size());
}

double sign(double v) { return (v > 0.0) - (v < 0.0); }

} // namespace

double photometric_loss(const raster::FrameBuffer &rendered, const Image<double> &target) {
  return photometric_loss(to_image(rendered), target);
}

int component_count(ParamGroup g, int sh_degree) {
  switch (g) {
  case ParamGroup::Position:
    return 3;
  case ParamGroup::ScaleLog:
    return 2;
  case ParamGroup::Rotation:
    return 4;
  case ParamGroup::OpacityLogit:
    return 1;
  case ParamGroup::Color:
    return 3 * core::sh_coeff_count(sh_degree);
  }
  return 0;
}

namespace {

void check_ref(const core::SplatScene &scene, const ParamRef &ref) {
  if (ref.splat >= scene.size())
    throw InvalidInput("parameter refers to splat " + std::to_string(ref.splat) +
                       " of a scene with " + std::to_string(scene.size()));
  if (ref.component < 0 || ref.component >= component_count(ref.group, scene.sh_degree()))
    throw InvalidInput(std::string("component out of range for group ") + group_name(ref.group));
}

double quat_component(const Eigen::Quaterniond &q, int c) {
  return c == 0 ? q.w() : c == 1 ? q.x() : c == 2 ? q.y() : q.z();
}

} // namespace

double get_param(const core::SplatScene &scene, const ParamRef &ref) {
  check_ref(scene, ref);
  const std::size_t i = ref.splat;
  switch (ref.group) {
  case ParamGroup::Position:
    return scene.centers()[i][ref.component];
  case ParamGroup::ScaleLog:
    return std::log(scene.scales()[i][ref.component]);
  case ParamGroup::Rotation:
    return quat_component(scene.rotations()[i], ref.component);
  case ParamGroup::OpacityLogit:
    return io::logit(scene.opacities()[i]);
  case ParamGroup::Color:
    return scene.sh_of(i)[ref.component / 3][ref.component % 3];
  }
  return 0.0;
}

void set_param(core::SplatScene &scene, const ParamRef &ref, double value) {
  check_ref(scene, ref);
  core::Splat2D s = scene.splat(ref.splat);
  switch (ref.group) {
  case ParamGroup::Position:
    s.center[ref.component] = value;
    break;
  case ParamGroup::ScaleLog:
    s.scales[ref.component] = std::exp(value);
    break;
  case ParamGroup::Rotation: {
    Eigen::Vector4d wxyz(s.rotation.w(), s.rotation.x(), s.rotation.y(), s.rotation.z());
    wxyz[ref.component] = value;
    s.rotation = Eigen::Quaterniond(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
    break;
  }
  case ParamGroup::OpacityLogit:
    s.opacity = io::sigmoid(value);
    break;
  case ParamGroup::Color:
    s.sh.coeffs[ref.component / 3][ref.component % 3] = value;
    break;
  }
  // Re-run validation, which also renormalizes the quaternion.
  scene.set(ref.splat, core::Splat2D(s.center, s.rotation, s.scales, s.opacity, s.sh));
}

FdGradient finite_diff_gradient(const core::SplatScene &scene, std::span<const View> views,
                                const ParamRef &ref, double eps,
                                const Eigen::Vector3d &background) {
  if (!(eps > 0.0))
    throw InvalidInput("finite-difference step must be positive");
  if (views.empty())
    throw InvalidInput("at least one view is required");
  check_ref(scene, ref);

  FdGradient g;
  if (ref.group == ParamGroup::OpacityLogit) {
    const double a = scene.opacities()[ref.splat];
    if (a <= 0.0 || a >= 1.0) {
      // The logit is infinite here; step from the nearest representable logit inward.
      constexpr double kEdge = 1e-7;
      const double edge = io::logit(a <= 0.0 ? kEdge : 1.0 - kEdge);
      const double inward = a <= 0.0 ? eps : -eps;
      core::SplatScene moved = scene;
      set_param(moved, ref, edge + inward);
      g.value = (mean_loss(moved, views, background) - mean_loss(scene, views, background)) /
                inward;
      g.one_sided = true;
      return g;
    }
  }
  const double theta = get_param(scene, ref);
  core::SplatScene plus = scene, minus = scene;
  set_param(plus, ref, theta + eps);
  set_param(minus, ref, theta - eps);
  g.value = (mean_loss(plus, views, background) - mean_loss(minus, views, background)) /
            (2.0 * eps);
  return g;
}

FdGradient finite_diff_gradient(const core::SplatScene &scene, const projection::Camera &camera,
                                const Image<double> &target, const ParamRef &ref, double eps,
                                const Eigen::Vector3d &background) {
  const View view{camera, target};
  return finite_diff_gradient(scene, std::span<const View>(&view, 1), ref, eps, background);
}

AnalyticGradient analytic_gradient(const core::SplatScene &scene,
                                   const projection::Camera &camera, const Image<double> &target,
                                   const Eigen::Vector3d &background) {
  const int w = projection::width_of(camera), h = projection::height_of(camera);
  if (target.width() != w || target.height() != h || target.channels() != 3)
    throw InvalidInput("target size does not match the camera");

  const raster::PreparedScene prepared(scene, camera);
  const std::size_t n = scene.size();
  const int stride = scene.sh_stride();
  AnalyticGradient out;
  out.opacity_logit.assign(n, 0.0);
  out.color.assign(n * stride, Eigen::Vector3d::Zero());

  // dL/dc and dL/dalpha accumulated per splat, chained to parameters at the end.
  std::vector<Eigen::Vector3d> d_color(n, Eigen::Vector3d::Zero());
  std::vector<double> d_alpha_weight(n, 0.0);

  Image<double> rendered(w, h, 3);
  const double norm = 1.0 / (3.0 * w * h);
  std::vector<raster::Fragment> frags;
  std::vector<double> trans;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      prepared.fragments_at(x, y, frags);
      raster::Compositor comp;
      trans.resize(frags.size());
      for (std::size_t i = 0; i < frags.size(); ++i) {
        trans[i] = comp.transmittance;
        comp.add(frags[i].alpha, frags[i].color, frags[i].depth);
      }
      const auto px = comp.finish(background);
      Eigen::Vector3d g;
      for (int c = 0; c < 3; ++c) {
        rendered.at(x, y, c) = px.color[c];
        g[c] = norm * sign(px.color[c] - target.at(x, y, c));
      }
      if (g.isZero())
        continue;
      // suffix = sum_{j > i} c_j alpha_j T_j + T_final * background
      Eigen::Vector3d suffix = comp.transmittance * background;
      for (std::size_t i = frags.size(); i-- > 0;) {
        const auto &f = frags[i];
        const double wt = f.alpha * trans[i];
        d_color[f.splat_index] += wt * g;
        if (!f.clamped) {
          const Eigen::Vector3d dc_dalpha = trans[i] * f.color - suffix / (1.0 - f.alpha);
          d_alpha_weight[f.splat_index] += g.dot(dc_dalpha) * f.weight;
        }
        suffix += wt * f.color;
      }
    }
  out.loss = photometric_loss(rendered, target);

  std::vector<double> basis(stride);
  for (std::size_t s = 0; s < n; ++s) {
    const double o = scene.opacities()[s];
    out.opacity_logit[s] = d_alpha_weight[s] * o * (1.0 - o);
    const Eigen::Vector3d dir = raster::sh_direction(scene.centers()[s], camera);
    core::sh_basis(scene.sh_degree(), dir, basis);
    const auto sh = scene.sh_of(s);
    Eigen::Vector3d raw = Eigen::Vector3d::Constant(0.5);
    for (int k = 0; k < stride; ++k)
      raw += basis[k] * sh[k];
    for (int k = 0; k < stride; ++k)
      for (int c = 0; c < 3; ++c)
        out.color[s * stride + k][c] = raw[c] > 0.0 ? d_color[s][c] * basis[k] : 0.0;
  }
  return out;
}

namespace {

// Adds `delta` to one parameter in optimization space, without renormalizing.
void step_field(core::Splat2D &s, const ParamRef &r, double delta) {
  switch (r.group) {
  case ParamGroup::Position:
    s.center[r.component] += delta;
    break;
  case ParamGroup::ScaleLog:
    s.scales[r.component] = std::exp(std::log(s.scales[r.component]) + delta);
    break;
  case ParamGroup::Rotation:
    s.rotation.coeffs()[(r.component + 3) % 4] += delta; // Eigen stores x, y, z, w
    break;
  case ParamGroup::OpacityLogit:
    s.opacity = io::sigmoid(io::logit(s.opacity) + delta);
    break;
  case ParamGroup::Color:
    s.sh.coeffs[r.component / 3][r.component % 3] += delta;
    break;
  }
}

} // namespace

FitResult fit(const core::SplatScene &init, std::span<const View> views, const FitConfig &config) {
  config.validate();
  if (views.empty())
    throw InvalidInput("fit needs at least one target view");
  for (const auto &v : views)
    if (v.target.width() != projection::width_of(v.camera) ||
        v.target.height() != projection::height_of(v.camera) || v.target.channels() != 3)
      throw InvalidInput("target image size does not match its camera");

  const bool analytic = config.gradient_mode == GradientMode::AnalyticWhereAvailable;
  auto is_analytic = [&](ParamGroup g) {
    return analytic && (g == ParamGroup::OpacityLogit || g == ParamGroup::Color);
  };

  core::SplatScene scene = init;
  std::vector<ParamRef> params;
  for (std::size_t s = 0; s < scene.size(); ++s)
    for (ParamGroup g : config.groups)
      for (int c = 0; c < component_count(g, scene.sh_degree()); ++c)
        params.push_back({s, g, c});
  std::vector<std::size_t> fd_params;
  for (std::size_t p = 0; p < params.size(); ++p)
    if (!is_analytic(params[p].group))
      fd_params.push_back(p);

  std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0), grad(params.size());
  const double nviews = static_cast<double>(views.size());
  const int threads = resolve_threads(config.threads);

  FitResult result;
  for (int it = 0; it <= config.iterations; ++it) {
    std::vector<AnalyticGradient> per_view(views.size());
    double loss = 0.0;
    if (analytic) {
      parallel_for(views.size(), threads, [&](std::size_t k) {
        per_view[k] = analytic_gradient(scene, views[k].camera, views[k].target, config.background);
      });
      for (const auto &a : per_view)
        loss += a.loss;
      loss /= nviews;
    } else {
      loss = mean_loss(scene, views, config.background, threads);
    }
    result.loss_trace.push_back(loss);
    if (!std::isfinite(loss))
      throw FitDiverged(it, "loss became non-finite at iteration " + std::to_string(it));
    if (it == config.iterations)
      break;

    std::fill(grad.begin(), grad.end(), 0.0);
    // L1 has a valid zero subgradient at zero loss, which makes exact fits stationary.
    if (loss > 0.0) {
      for (std::size_t p = 0; p < params.size(); ++p) {
        const auto &r = params[p];
        if (!is_analytic(r.group))
          continue;
        double sum = 0.0;
        for (const auto &a : per_view)
          sum += r.group == ParamGroup::OpacityLogit
                     ? a.opacity_logit[r.splat]
                     : a.color[r.splat * scene.sh_stride() + r.component / 3][r.component % 3];
        grad[p] = sum / nviews;
      }
      parallel_for(fd_params.size(), threads, [&](std::size_t q) {
        const auto &r = params[fd_params[q]];
        grad[fd_params[q]] =
            finite_diff_gradient(scene, views, r, config.eps_for(r.group), config.background)
                .value;
      });
    }

    const int t = it + 1;
    const double decay =
        config.iterations > 1
            ? std::pow(config.final_lr_fraction, static_cast<double>(it) / (config.iterations - 1))
            : 1.0;
    const double bc1 = 1.0 - std::pow(config.beta1, t), bc2 = 1.0 - std::pow(config.beta2, t);
    std::vector<double> delta(params.size(), 0.0);
    for (std::size_t p = 0; p < params.size(); ++p) {
      m[p] = config.beta1 * m[p] + (1.0 - config.beta1) * grad[p];
      v[p] = config.beta2 * v[p] + (1.0 - config.beta2) * grad[p] * grad[p];
      const double lr = config.learning_rates.of(params[p].group) * decay;
      delta[p] = -lr * (m[p] / bc1) / (std::sqrt(v[p] / bc2) + config.adam_eps);
    }
    // All components of a splat move together; untouched splats keep their exact bits.
    for (std::size_t p = 0; p < params.size();) {
      const std::size_t splat = params[p].splat;
      core::Splat2D sp = scene.splat(splat);
      bool moved = false;
      for (; p < params.size() && params[p].splat == splat; ++p) {
        if (delta[p] == 0.0)
          continue;
        if (!std::isfinite(delta[p]))
          throw FitDiverged(it, "non-finite update at iteration " + std::to_string(it));
        step_field(sp, params[p], delta[p]);
        moved = true;
      }
      if (moved)
        scene.set(splat, core::Splat2D(sp.center, sp.rotation, sp.scales, sp.opacity, sp.sh));
    }
  }
  result.scene = std::move(scene);
  return result;
}

std::string loss_trace_csv(const std::vector<double> &trace) {
  std::ostringstream out;
  out.precision(17);
  out << "iteration,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i)
    out << i << "," << trace[i] << "\n";
  return out.str();
}

} // namespace orthosplat::fit
