#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <unordered_map>

#include "orthosplat/alignment.hpp"
#include "orthosplat/colmap.hpp"
#include "orthosplat/error.hpp"
#include "orthosplat/parallel.hpp"
#include "orthosplat/partition.hpp"
#include "orthosplat/ply.hpp"
#include "orthosplat/raster_io.hpp"
#include "orthosplat/tdom.hpp"

namespace orthosplat::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

/// Collects per-stage wall-clock timings and tags exceptions with the stage name.
class Run {
public:
  explicit Run(std::string command) { manifest_["command"] = std::move(command); }

  template <typename F> auto stage(const std::string &name, F &&fn) {
    const auto t0 = std::chrono::steady_clock::now();
    auto finish = [&] {
      timings_[name] =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    try {
      if constexpr (std::is_void_v<decltype(fn())>) {
        fn();
        finish();
      } else {
        auto r = fn();
        finish();
        return r;
      }
    } catch (const StageError &) {
      throw;
    } catch (const std::exception &e) {
      throw StageError(name, e.what());
    }
  }

  ordered_json &config() { return manifest_["config"]; }
  void input(const fs::path &path) {
    manifest_["inputs"][path.string()] = fs::is_regular_file(path) ? file_digest(path) : "";
  }
  void warn(const std::string &w) {
    std::cerr << "warning: " << w << "\n";
    warnings_.push_back(w);
  }

  ordered_json finish(const fs::path &path) {
    manifest_["tool_version"] = kToolVersion;
    manifest_["timings_s"] = timings_;
    manifest_["warnings"] = warnings_;
    std::ofstream out(path);
    if (!out || !(out << manifest_.dump(2) << "\n"))
      throw StageError("manifest", "cannot write '" + path.string() + "'");
    return manifest_;
  }

private:
  ordered_json manifest_ = ordered_json::object();
  ordered_json timings_ = ordered_json::object();
  std::vector<std::string> warnings_;
};

void write_text(const fs::path &path, const std::string &text) {
  std::ofstream out(path);
  if (!out || !(out << text))
    throw IoError("cannot write '" + path.string() + "'");
}

void make_dir(const fs::path &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

void require_file(const fs::path &path) {
  if (!fs::is_regular_file(path))
    throw IoError("no such file '" + path.string() + "'");
}

std::pair<SparseModel, std::optional<io::AlignmentTransform>>
load_model(const fs::path &dir, const std::string &align) {
  SparseModel model = io::read_colmap_sparse(dir);
  if (align == "none")
    return {std::move(model), std::nullopt};
  if (align != "auto")
    throw InvalidInput("--align must be 'none' or 'auto', got '" + align + "'");
  auto [aligned, transform] = io::manhattan_align(model);
  return {std::move(aligned), transform};
}

json matrix_json(const Eigen::Matrix3d &m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r)
    rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
  return rows;
}

Eigen::Matrix3d matrix_from_json(const json &j) {
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      m(r, c) = j.at(r).at(c).get<double>();
  return m;
}

Image<double> linear_from_srgb8(const ImageU8 &img) {
  if (img.channels() < 3)
    throw InvalidInput("target image must be RGB");
  Image<double> out(img.width(), img.height(), 3);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c)
        out.at(x, y, c) = srgb_to_linear(img.at(x, y, c) / 255.0);
  return out;
}

} // namespace

double srgb_to_linear(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

std::string file_digest(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open '" + path.string() + "'");
  std::uint64_t h = 1469598103934665603ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  std::ostringstream out;
  out << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

json camera_to_json(const projection::Camera &camera) {
  json j;
  const auto &pose = projection::pose_of(camera);
  j["pose"] = {{"linear", matrix_json(pose.linear)},
               {"translation", {pose.translation.x(), pose.translation.y(), pose.translation.z()}}};
  if (const auto *o = std::get_if<projection::OrthoCamera>(&camera)) {
    j["type"] = "ortho";
    j["left"] = o->left;
    j["right"] = o->right;
    j["bottom"] = o->bottom;
    j["top"] = o->top;
  } else {
    const auto &p = std::get<projection::PerspectiveCamera>(camera);
    j["type"] = "perspective";
    j["fov_x"] = p.fov_x;
    j["fov_y"] = p.fov_y;
  }
  j["z_near"] = projection::near_of(camera);
  j["z_far"] = projection::far_of(camera);
  j["width"] = projection::width_of(camera);
  j["height"] = projection::height_of(camera);
  return j;
}

projection::Camera camera_from_json(const json &j) {
  projection::Pose pose;
  pose.linear = matrix_from_json(j.at("pose").at("linear"));
  const auto &t = j.at("pose").at("translation");
  pose.translation = {t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>()};
  const std::string type = j.at("type").get<std::string>();
  if (type == "ortho") {
    projection::OrthoCamera c;
    c.pose = pose;
    c.left = j.at("left").get<double>();
    c.right = j.at("right").get<double>();
    c.bottom = j.at("bottom").get<double>();
    c.top = j.at("top").get<double>();
    c.z_near = j.at("z_near").get<double>();
    c.z_far = j.at("z_far").get<double>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.validate();
    return c;
  }
  if (type == "perspective") {
    projection::PerspectiveCamera c;
    c.pose = pose;
    c.fov_x = j.at("fov_x").get<double>();
    c.fov_y = j.at("fov_y").get<double>();
    c.z_near = j.at("z_near").get<double>();
    c.z_far = j.at("z_far").get<double>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.validate();
    return c;
  }
  throw SchemaError("unknown camera type '" + type + "'");
}

std::vector<fit::View> load_views(const fs::path &views_dir, const Eigen::Vector3d &background) {
  const fs::path index = views_dir / "views.json";
  std::ifstream in(index);
  if (!in)
    throw IoError("cannot open '" + index.string() + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception &e) {
    throw SchemaError("'" + index.string() + "': " + e.what());
  }
  std::optional<core::SplatScene> reference;
  if (doc.contains("reference"))
    reference = io::read_splat_ply(views_dir / doc["reference"].get<std::string>());

  std::vector<fit::View> views;
  try {
    for (const auto &v : doc.at("views")) {
      fit::View view;
      view.camera = camera_from_json(v.at("camera"));
      if (v.contains("image")) {
        const fs::path img = views_dir / v["image"].get<std::string>();
        if (img.extension() == ".pfm") {
          const auto f = io::read_pfm(img);
          view.target = Image<double>(f.width(), f.height(), 3);
          if (f.channels() != 3)
            throw SchemaError("'" + img.string() + "' is not an RGB PFM");
          std::copy(f.data().begin(), f.data().end(), view.target.data().begin());
        } else {
          view.target = linear_from_srgb8(io::read_png(img));
        }
      } else if (reference) {
        raster::RenderOptions ro;
        ro.background = background;
        const auto fb = raster::render(*reference, view.camera, ro);
        view.target = Image<double>(fb.width, fb.height, 3);
        for (int y = 0; y < fb.height; ++y)
          for (int x = 0; x < fb.width; ++x)
            for (int c = 0; c < 3; ++c)
              view.target.at(x, y, c) = fb.color[fb.index(x, y)][c];
      } else {
        throw SchemaError("view without 'image' and no 'reference' scene");
      }
      views.push_back(std::move(view));
    }
  } catch (const json::exception &e) {
    throw SchemaError("'" + index.string() + "': " + e.what());
  }
  if (views.empty())
    throw SchemaError("'" + index.string() + "' lists no views");
  return views;
}

std::vector<double> knn_scales(const std::vector<Eigen::Vector3d> &pts, int k) {
  const std::size_t n = pts.size();
  std::vector<double> out(n, 1.0);
  if (n < 2 || k < 1)
    return out;
  k = std::min<int>(k, static_cast<int>(n) - 1);
  core::Aabb box;
  for (const auto &p : pts)
    box.extend(p);
  const double extent = std::max(box.extent().maxCoeff(), 1e-9);
  const double cell = extent / std::max(1.0, std::cbrt(static_cast<double>(n)));
  auto key_of = [&](const Eigen::Vector3d &p) {
    return ((p - box.min) / cell).array().floor().cast<long long>().eval();
  };
  auto hash = [](long long x, long long y, long long z) {
    return (x * 73856093LL) ^ (y * 19349663LL) ^ (z * 83492791LL);
  };
  std::unordered_map<long long, std::vector<std::size_t>> grid;
  for (std::size_t i = 0; i < n; ++i) {
    const auto key = key_of(pts[i]);
    grid[hash(key.x(), key.y(), key.z())].push_back(i);
  }
  const long long max_ring = static_cast<long long>(std::ceil(extent / cell)) + 1;
  for (std::size_t i = 0; i < n; ++i) {
    const auto key = key_of(pts[i]);
    std::vector<double> best; // squared distances, ascending, at most k
    for (long long ring = 0; ring <= max_ring; ++ring) {
      for (long long dx = -ring; dx <= ring; ++dx)
        for (long long dy = -ring; dy <= ring; ++dy)
          for (long long dz = -ring; dz <= ring; ++dz) {
            if (std::max({std::llabs(dx), std::llabs(dy), std::llabs(dz)}) != ring)
              continue;
            auto it = grid.find(hash(key.x() + dx, key.y() + dy, key.z() + dz));
            if (it == grid.end())
              continue;
            for (std::size_t j : it->second) {
              if (j == i)
                continue;
              // Hash collisions can bring in far cells; the distance test handles them.
              const double d2 = (pts[j] - pts[i]).squaredNorm();
              best.insert(std::upper_bound(best.begin(), best.end(), d2), d2);
              if (static_cast<int>(best.size()) > k)
                best.pop_back();
            }
          }
      // Anything outside ring r is at least r * cell away.
      if (static_cast<int>(best.size()) == k && best.back() <= std::pow(ring * cell, 2))
        break;
    }
    double mean = 0.0;
    for (double d2 : best)
      mean += d2;
    out[i] = std::max(std::sqrt(mean / best.size()), 1e-7);
  }
  return out;
}

ordered_json cmd_partition(const PartitionArgs &a) {
  Run run("partition");
  run.config() = {{"colmap_dir", a.colmap_dir.string()}, {"out_dir", a.out_dir.string()},
                  {"cols", a.cols},  {"rows", a.rows},
                  {"ratio", a.ratio}, {"threshold", a.threshold},
                  {"align", a.align}, {"threads", resolve_threads(a.threads)}};
  for (const char *f : {"cameras.txt", "images.txt", "points3D.txt"})
    run.input(a.colmap_dir / f);

  auto [model, transform] = run.stage("read", [&] { return load_model(a.colmap_dir, a.align); });
  if (transform)
    for (const auto &w : transform->warnings)
      run.warn(w);
  const auto plan = run.stage("partition", [&] {
    return partition::build_plan(model, a.cols, a.rows, a.ratio, a.threshold);
  });
  for (const auto &w : plan.warnings)
    run.warn(w);

  run.stage("write", [&] {
    make_dir(a.out_dir / "cells");
    write_text(a.out_dir / "plan.json", partition::plan_manifest(plan));
    for (const auto &cell : plan.cells) {
      const std::string stem =
          "cell_r" + std::to_string(cell.row) + "_c" + std::to_string(cell.col);
      std::ostringstream cams, pts;
      for (int id : cell.selected_camera_ids)
        cams << id << "\n";
      for (std::size_t i : cell.point_indices)
        pts << i << "\n";
      write_text(a.out_dir / "cells" / (stem + "_cameras.txt"), cams.str());
      write_text(a.out_dir / "cells" / (stem + "_points.txt"), pts.str());
    }
  });
  return run.finish(a.out_dir / "run.json");
}

ordered_json cmd_render(const RenderArgs &a) {
  Run run("render");
  if (a.background.size() != 3)
    throw StageError("config", "--background needs three values");
  run.config() = {{"ply", a.ply.string()},
                  {"out_dir", a.out_dir.string()},
                  {"gsd", a.gsd},
                  {"tiles", std::to_string(a.tile_rows) + "x" + std::to_string(a.tile_cols)},
                  {"tiles_in_flight", a.tiles_in_flight},
                  {"z_margin", a.z_margin},
                  {"background", a.background},
                  {"threads", resolve_threads(a.threads)}};
  const auto scene = run.stage("read", [&] {
    require_file(a.ply);
    return io::read_splat_ply(a.ply);
  });
  run.input(a.ply);
  const auto plan = run.stage("plan", [&] {
    return tdom::plan_tdom(scene.bounds(), a.gsd, a.tile_rows, a.tile_cols, a.z_margin);
  });
  run.config()["output_size"] = {plan.width, plan.height};
  const auto product = run.stage("render", [&] {
    tdom::TdomRenderOptions o;
    o.background = {a.background[0], a.background[1], a.background[2]};
    o.threads = a.threads;
    o.max_tiles_in_flight = a.tiles_in_flight;
    return tdom::render_tdom(scene, plan, o);
  });
  run.stage("export", [&] { tdom::export_products(product, a.out_dir); });
  return run.finish(a.out_dir / "run.json");
}

ordered_json cmd_eval_gcp(const EvalGcpArgs &a) {
  Run run("eval-gcp");
  run.config() = {{"tdom_dir", a.tdom_dir.string()},
                  {"gcp_csv", a.gcp_csv.string()},
                  {"out_dir", a.out_dir.string()},
                  {"anchor", {a.anchor_a, a.anchor_b}},
                  {"earth_radius_m", eval::kEarthRadius}};
  const auto gcps = run.stage("read", [&] {
    require_file(a.gcp_csv);
    return eval::read_gcp_csv(a.gcp_csv);
  });
  run.input(a.gcp_csv);
  run.input(a.tdom_dir / "product.json");
  const auto product = run.stage("tdom", [&] {
    std::ifstream in(a.tdom_dir / "product.json");
    if (!in)
      throw IoError("cannot open '" + (a.tdom_dir / "product.json").string() + "'");
    json meta;
    in >> meta;
    return meta;
  });
  const auto report = run.stage("evaluate", [&] {
    eval::validate_gcps(gcps, Eigen::Vector2i(product.at("width").get<int>(),
                                              product.at("height").get<int>()));
    const eval::GcpPair anchor{a.anchor_a, a.anchor_b};
    const double scale = eval::gcp_scale_align(gcps, anchor);
    return eval::gcp_errors(gcps, scale, anchor);
  });
  run.config()["scale_factor"] = report.scale_factor;
  run.config()["tdom_gsd"] = product.at("gsd").get<double>();
  run.stage("write", [&] {
    make_dir(a.out_dir);
    write_text(a.out_dir / "gcp_report.txt", eval::format_report(report));
    write_text(a.out_dir / "gcp_report.csv", eval::report_csv(report));
  });
  return run.finish(a.out_dir / "run.json");
}

ordered_json cmd_depth_edges(const DepthEdgesArgs &a) {
  Run run("depth-edges");
  run.config() = {{"tdom_dir", a.tdom_dir.string()},
                  {"out_dir", a.out_dir.string()},
                  {"sigma", a.canny.sigma},
                  {"low", a.canny.low},
                  {"high", a.canny.high}};
  const auto product = run.stage("read", [&] { return tdom::load_products(a.tdom_dir); });
  for (const char *f : {"color.png", "depth_normalized.pfm", "coverage.png"})
    run.input(a.tdom_dir / f);
  const auto overlays = run.stage("edges", [&] {
    Image<double> depth(product.depth_normalized.width(), product.depth_normalized.height());
    std::copy(product.depth_normalized.data().begin(), product.depth_normalized.data().end(),
              depth.data().begin());
    ImageU8 mask(product.coverage.width(), product.coverage.height());
    for (std::size_t i = 0; i < mask.data().size(); ++i)
      mask.data()[i] = product.coverage.data()[i] > 0 ? 1 : 0;
    ImageU8 rgb = product.color_srgb;
    if (rgb.channels() != 3)
      throw SchemaError("color.png must be RGB");
    return eval::depth_overlays(rgb, depth, a.canny, &mask);
  });
  std::size_t count = 0;
  for (auto v : overlays.edges.data())
    count += v;
  run.config()["edge_pixels"] = count;
  run.stage("write", [&] {
    make_dir(a.out_dir);
    io::write_png(a.out_dir / "red_composite.png", overlays.red_composite);
    io::write_png(a.out_dir / "edge_overlay.png", overlays.edge_overlay);
    ImageU8 edges = overlays.edges;
    for (auto &v : edges.data())
      v = v ? 255 : 0;
    io::write_png(a.out_dir / "edges.png", edges);
  });
  return run.finish(a.out_dir / "run.json");
}

ordered_json cmd_fit(const FitArgs &a) {
  Run run("fit");
  fit::FitConfig config = a.config;
  config.threads = a.threads;
  if (a.gradient == "analytic")
    config.gradient_mode = fit::GradientMode::AnalyticWhereAvailable;
  else if (a.gradient == "finite-difference")
    config.gradient_mode = fit::GradientMode::FiniteDifference;
  else
    throw StageError("config", "--gradient must be 'analytic' or 'finite-difference'");
  config.groups.clear();
  for (const auto &g : a.groups) {
    try {
      config.groups.push_back(fit::group_from_name(g));
    } catch (const std::exception &e) {
      throw StageError("config", e.what());
    }
  }
  const auto &lr = config.learning_rates;
  run.config() = {{"ply_init", a.ply_init.string()},
                  {"views_dir", a.views_dir.string()},
                  {"out_dir", a.out_dir.string()},
                  {"iterations", config.iterations},
                  {"gradient", a.gradient},
                  {"groups", a.groups},
                  {"learning_rates",
                   {{"position", lr.position},
                    {"scale", lr.scale_log},
                    {"rotation", lr.rotation},
                    {"opacity", lr.opacity_logit},
                    {"color", lr.color}}},
                  {"position_eps", config.position_eps},
                  {"param_eps", config.param_eps},
                  {"final_lr_fraction", config.final_lr_fraction},
                  {"threads", resolve_threads(a.threads)}};
  const auto scene = run.stage("read", [&] {
    require_file(a.ply_init);
    return io::read_splat_ply(a.ply_init);
  });
  run.input(a.ply_init);
  run.input(a.views_dir / "views.json");
  const auto views =
      run.stage("views", [&] { return load_views(a.views_dir, config.background); });
  const auto result = run.stage("fit", [&] { return fit::fit(scene, views, config); });
  run.config()["initial_loss"] = result.loss_trace.front();
  run.config()["final_loss"] = result.loss_trace.back();
  run.stage("write", [&] {
    make_dir(a.out_dir);
    io::write_splat_ply(result.scene, a.out_dir / "fitted.ply");
    write_text(a.out_dir / "loss.csv", fit::loss_trace_csv(result.loss_trace));
  });
  return run.finish(a.out_dir / "run.json");
}

ordered_json cmd_convert(const ConvertArgs &a) {
  Run run("convert");
  run.config() = {{"colmap_dir", a.colmap_dir.string()}, {"out_ply", a.out_ply.string()},
                  {"align", a.align},                    {"opacity", a.opacity},
                  {"neighbors", a.neighbors}};
  for (const char *f : {"cameras.txt", "images.txt", "points3D.txt"})
    run.input(a.colmap_dir / f);
  if (!(a.opacity > 0.0 && a.opacity <= 1.0))
    throw StageError("config", "--opacity must be in (0, 1]");
  auto [model, transform] = run.stage("read", [&] { return load_model(a.colmap_dir, a.align); });
  if (transform) {
    for (const auto &w : transform->warnings)
      run.warn(w);
    run.config()["alignment_rotation"] = matrix_json(transform->rotation);
  }
  const auto scene = run.stage("initialize", [&] {
    std::vector<Eigen::Vector3d> pts;
    for (const auto &p : model.points)
      pts.push_back(p.xyz);
    const auto scales = knn_scales(pts, a.neighbors);
    core::SplatScene s(0);
    s.reserve(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto &rgb = model.points[i].rgb;
      const Eigen::Vector3d lin(srgb_to_linear(rgb[0] / 255.0), srgb_to_linear(rgb[1] / 255.0),
                                srgb_to_linear(rgb[2] / 255.0));
      s.push_back(core::Splat2D(pts[i], Eigen::Quaterniond::Identity(),
                                Eigen::Vector2d::Constant(scales[i]), a.opacity,
                                core::ShCoeffs::from_rgb(lin)));
    }
    return s;
  });
  run.stage("write", [&] {
    if (a.out_ply.has_parent_path())
      make_dir(a.out_ply.parent_path());
    io::write_splat_ply(scene, a.out_ply);
  });
  fs::path manifest = a.out_ply;
  manifest.replace_extension(".run.json");
  return run.finish(manifest);
}

} // namespace orthosplat::cli
