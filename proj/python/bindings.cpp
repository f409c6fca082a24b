#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "commands.hpp"
#include "orthosplat/colmap.hpp"
#include "orthosplat/error.hpp"
#include "orthosplat/eval.hpp"
#include "orthosplat/fit.hpp"
#include "orthosplat/partition.hpp"
#include "orthosplat/ply.hpp"
#include "orthosplat/tdom.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace orthosplat;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Copies an interleaved image into a (h, w) or (h, w, c) array.
template <typename T> py::array_t<T> to_numpy(const Image<T> &img) {
  std::vector<py::ssize_t> shape{img.height(), img.width()};
  if (img.channels() > 1)
    shape.push_back(img.channels());
  py::array_t<T> out(shape);
  std::copy(img.data().begin(), img.data().end(), out.mutable_data());
  return out;
}

Image<double> image_from(const Array &a, int want_channels) {
  if (a.ndim() != 2 && a.ndim() != 3)
    throw InvalidInput("expected a (h, w) or (h, w, c) array");
  const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  if (want_channels && c != want_channels)
    throw InvalidInput("expected " + std::to_string(want_channels) + " channels, got " + std::to_string(c));
  Image<double> img(w, h, c);
  std::copy(a.data(), a.data() + a.size(), img.data().begin());
  return img;
}

ImageU8 u8_from(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> &a) {
  if (a.ndim() != 3 || a.shape(2) != 3)
    throw InvalidInput("expected an (h, w, 3) uint8 array");
  ImageU8 img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), 3);
  std::copy(a.data(), a.data() + a.size(), img.data().begin());
  return img;
}

Array rows(std::size_t n, int k, const std::function<double(std::size_t, int)> &f) {
  Array out({static_cast<py::ssize_t>(n), static_cast<py::ssize_t>(k)});
  auto m = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j)
      m(i, j) = f(i, j);
  return out;
}

core::SplatScene scene_from_arrays(const Array &centers, const Array &rotations, const Array &scales,
                                   const Array &opacities, const Array &colors) {
  const auto n = static_cast<std::size_t>(centers.shape(0));
  auto shape_ok = [&](const Array &a, int k) {
    return a.ndim() == 2 && static_cast<std::size_t>(a.shape(0)) == n && a.shape(1) == k;
  };
  if (!shape_ok(centers, 3) || !shape_ok(rotations, 4) || !shape_ok(scales, 2) || !shape_ok(colors, 3) ||
      opacities.ndim() != 1 || static_cast<std::size_t>(opacities.shape(0)) != n)
    throw InvalidInput("expected centers (n,3), rotations (n,4) wxyz, scales (n,2), opacities (n,), colors (n,3)");
  auto c = centers.unchecked<2>();
  auto q = rotations.unchecked<2>();
  auto s = scales.unchecked<2>();
  auto o = opacities.unchecked<1>();
  auto rgb = colors.unchecked<2>();
  core::SplatScene scene(0);
  scene.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    scene.push_back(core::Splat2D({c(i, 0), c(i, 1), c(i, 2)}, Eigen::Quaterniond(q(i, 0), q(i, 1), q(i, 2), q(i, 3)),
                                  {s(i, 0), s(i, 1)}, o(i), core::ShCoeffs::from_rgb({rgb(i, 0), rgb(i, 1), rgb(i, 2)})));
  return scene;
}

projection::OrthoCamera nadir_ortho(double left, double right, double bottom, double top, double height,
                                    int width, int rows_, double depth) {
  projection::OrthoCamera cam;
  cam.pose.linear = Eigen::Vector3d(1.0, 1.0, -1.0).asDiagonal();
  cam.pose.translation = {0.0, 0.0, height};
  cam.left = left;
  cam.right = right;
  cam.bottom = bottom;
  cam.top = top;
  cam.z_near = 0.0;
  cam.z_far = depth;
  cam.width = width;
  cam.height = rows_;
  cam.validate();
  return cam;
}

py::dict product_dict(const tdom::TdomProduct &p) {
  py::dict d;
  d["color"] = to_numpy(p.color);
  d["depth_raw"] = to_numpy(p.depth_raw);
  d["depth_normalized"] = to_numpy(p.depth_normalized);
  d["coverage"] = to_numpy(p.coverage);
  d["geo_transform"] = p.geo_transform.coeffs;
  d["gsd"] = p.gsd;
  return d;
}

std::string dump(const nlohmann::ordered_json &j) { return j.dump(2); }

} // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Orthophoto and depth rendering from 2D Gaussian splat scenes";

  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_RuntimeError);
  py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<fit::FitDiverged>(m, "FitDiverged", PyExc_ArithmeticError);

  py::class_<core::SplatScene>(m, "Scene")
      .def(py::init<int>(), py::arg("sh_degree") = 0)
      .def_static("from_arrays", &scene_from_arrays, py::arg("centers"), py::arg("rotations"), py::arg("scales"),
                  py::arg("opacities"), py::arg("colors"),
                  "Degree-0 scene from per-splat arrays; rotations are unit quaternions (w, x, y, z), colors linear RGB.")
      .def("__len__", &core::SplatScene::size)
      .def_property_readonly("sh_degree", &core::SplatScene::sh_degree)
      .def_property_readonly("centers",
                             [](const core::SplatScene &s) {
                               return rows(s.size(), 3, [&](std::size_t i, int j) { return s.centers()[i][j]; });
                             })
      .def_property_readonly("rotations",
                             [](const core::SplatScene &s) {
                               return rows(s.size(), 4, [&](std::size_t i, int j) {
                                 const auto &q = s.rotations()[i];
                                 return j == 0 ? q.w() : q.vec()[j - 1];
                               });
                             })
      .def_property_readonly("scales",
                             [](const core::SplatScene &s) {
                               return rows(s.size(), 2, [&](std::size_t i, int j) { return s.scales()[i][j]; });
                             })
      .def_property_readonly("opacities",
                             [](const core::SplatScene &s) {
                               Array out(static_cast<py::ssize_t>(s.size()));
                               std::copy(s.opacities().begin(), s.opacities().end(), out.mutable_data());
                               return out;
                             })
      .def_property_readonly("bounds", [](const core::SplatScene &s) {
        return std::make_pair(Eigen::Vector3d(s.bounds().min), Eigen::Vector3d(s.bounds().max));
      });

  m.def("read_ply", &io::read_splat_ply, py::arg("path"));
  m.def("write_ply", &io::write_splat_ply, py::arg("scene"), py::arg("path"));

  py::class_<projection::OrthoCamera>(m, "OrthoCamera")
      .def_readonly("left", &projection::OrthoCamera::left)
      .def_readonly("right", &projection::OrthoCamera::right)
      .def_readonly("bottom", &projection::OrthoCamera::bottom)
      .def_readonly("top", &projection::OrthoCamera::top)
      .def_readonly("width", &projection::OrthoCamera::width)
      .def_readonly("height", &projection::OrthoCamera::height);
  m.def("nadir_ortho_camera", &nadir_ortho, py::arg("left"), py::arg("right"), py::arg("bottom"), py::arg("top"),
        py::arg("height"), py::arg("width"), py::arg("rows"), py::arg("depth") = 1000.0,
        "Downward-looking orthographic camera at world height `height` covering [left, right] x [bottom, top].");

  m.def(
      "render",
      [](const core::SplatScene &scene, const projection::OrthoCamera &cam, const Eigen::Vector3d &background,
         int threads) {
        raster::RenderOptions o;
        o.background = background;
        o.threads = threads;
        raster::FrameBuffer fb;
        {
          py::gil_scoped_release release;
          fb = raster::render(scene, cam, o);
        }
        Image<double> color(fb.width, fb.height, 3), depth(fb.width, fb.height), alpha(fb.width, fb.height);
        for (int y = 0; y < fb.height; ++y)
          for (int x = 0; x < fb.width; ++x) {
            const auto i = fb.index(x, y);
            for (int c = 0; c < 3; ++c)
              color.at(x, y, c) = fb.color[i][c];
            depth.at(x, y) = fb.normalized_depth(i);
            alpha.at(x, y) = fb.accum_alpha[i];
          }
        py::dict d;
        d["color"] = to_numpy(color);
        d["depth"] = to_numpy(depth);
        d["alpha"] = to_numpy(alpha);
        return d;
      },
      py::arg("scene"), py::arg("camera"), py::arg("background") = Eigen::Vector3d::Ones(), py::arg("threads") = 1);

  m.def(
      "render_tdom",
      [](const core::SplatScene &scene, double gsd, std::pair<int, int> tiles, const Eigen::Vector3d &background,
         int threads, double z_margin) {
        tdom::TdomProduct p;
        {
          py::gil_scoped_release release;
          const auto plan = tdom::plan_tdom(scene.bounds(), gsd, tiles.first, tiles.second, z_margin);
          tdom::TdomRenderOptions o;
          o.background = background;
          o.threads = threads;
          p = tdom::render_tdom(scene, plan, o);
        }
        return product_dict(p);
      },
      py::arg("scene"), py::arg("gsd"), py::arg("tiles") = std::make_pair(1, 1),
      py::arg("background") = Eigen::Vector3d::Ones(), py::arg("threads") = 0,
      py::arg("z_margin") = tdom::kDefaultZMarginFraction,
      "Nadir true orthophoto over the scene's center bounds. Returns color, depth_raw, "
      "depth_normalized, coverage arrays plus the pixel-center geo-transform.");

  m.def("haversine", &eval::haversine, py::arg("lat1"), py::arg("lon1"), py::arg("lat2"), py::arg("lon2"));

  m.def(
      "gcp_errors",
      [](const std::vector<std::tuple<std::string, double, double, double, double>> &points,
         std::pair<std::string, std::string> anchor) {
        std::vector<eval::GcpRecord> gcps;
        for (const auto &[id, lat, lon, px, py_] : points)
          gcps.push_back({id, lat, lon, {px, py_}});
        eval::validate_gcps(gcps);
        const double scale = eval::gcp_scale_align(gcps, anchor);
        const auto report = eval::gcp_errors(gcps, scale, anchor);
        py::list rows_out;
        for (const auto &e : report.pair_errors) {
          py::dict d;
          d["id_a"] = e.id_a;
          d["id_b"] = e.id_b;
          d["true_m"] = e.true_m;
          d["measured_m"] = e.measured_m;
          d["abs_error_m"] = e.abs_error_m;
          d["anchor"] = e.anchor;
          rows_out.append(d);
        }
        return py::make_tuple(scale, rows_out);
      },
      py::arg("gcps"), py::arg("anchor"),
      "gcps: (id, lat, lon, px, py) tuples. Returns (meters per pixel, pair error dicts).");

  m.def(
      "canny",
      [](const Array &image, double sigma, double low, double high) {
        eval::CannyParams p;
        p.sigma = sigma;
        p.low = low;
        p.high = high;
        return to_numpy(eval::canny_edges(image_from(image, 1), p));
      },
      py::arg("image"), py::arg("sigma") = 1.4, py::arg("low") = 0.1, py::arg("high") = 0.3);

  m.def(
      "depth_overlays",
      [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> &tdom_rgb, const Array &depth,
         std::optional<py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>> mask, double sigma,
         double low, double high) {
        eval::CannyParams p;
        p.sigma = sigma;
        p.low = low;
        p.high = high;
        std::optional<ImageU8> m8;
        if (mask) {
          const auto &a = *mask;
          if (a.ndim() != 2)
            throw InvalidInput("mask must be (h, w)");
          m8.emplace(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
          std::copy(a.data(), a.data() + a.size(), m8->data().begin());
        }
        const auto o = eval::depth_overlays(u8_from(tdom_rgb), image_from(depth, 1), p, m8 ? &*m8 : nullptr);
        py::dict d;
        d["red_composite"] = to_numpy(o.red_composite);
        d["edge_overlay"] = to_numpy(o.edge_overlay);
        d["edges"] = to_numpy(o.edges);
        return d;
      },
      py::arg("tdom_rgb"), py::arg("depth"), py::arg("mask") = py::none(), py::arg("sigma") = 1.4,
      py::arg("low") = 0.1, py::arg("high") = 0.3);

  m.def(
      "partition_plan",
      [](const fs::path &colmap_dir, int cols, int rows_, double ratio, double threshold) {
        const auto model = io::read_colmap_sparse(colmap_dir);
        return partition::plan_manifest(partition::build_plan(model, cols, rows_, ratio, threshold));
      },
      py::arg("colmap_dir"), py::arg("cols") = 2, py::arg("rows") = 2, py::arg("ratio") = 0.2,
      py::arg("threshold") = 0.25, "Partition manifest (JSON text) for a COLMAP text model.");

  m.def(
      "fit_colors",
      [](const core::SplatScene &init, const std::vector<std::pair<projection::OrthoCamera, Array>> &views,
         int iterations, double lr) {
        std::vector<fit::View> vs;
        for (const auto &[cam, target] : views)
          vs.push_back({cam, image_from(target, 3)});
        fit::FitConfig cfg;
        cfg.iterations = iterations;
        cfg.groups = {fit::ParamGroup::Color};
        cfg.learning_rates.color = lr;
        fit::FitResult r;
        {
          py::gil_scoped_release release;
          r = fit::fit(init, vs, cfg);
        }
        return py::make_tuple(r.scene, r.loss_trace);
      },
      py::arg("scene"), py::arg("views"), py::arg("iterations") = 200, py::arg("lr") = 0.05,
      "Color-only L1 fit against (camera, linear RGB target) views. Returns (scene, loss trace).");

  // Subcommands with the same arguments and output files as the command-line tool.
  m.def(
      "cmd_render",
      [](const fs::path &ply, const fs::path &out, double gsd, std::pair<int, int> tiles, int threads) {
        cli::RenderArgs a;
        a.ply = ply;
        a.out_dir = out;
        a.gsd = gsd;
        a.tile_rows = tiles.first;
        a.tile_cols = tiles.second;
        a.threads = threads;
        return dump(cli::cmd_render(a));
      },
      py::arg("ply"), py::arg("out_dir"), py::arg("gsd") = 0.1, py::arg("tiles") = std::make_pair(1, 1),
      py::arg("threads") = 0);
  m.def(
      "cmd_eval_gcp",
      [](const fs::path &tdom_dir, const fs::path &gcps, const fs::path &out, std::pair<std::string, std::string> anchor) {
        cli::EvalGcpArgs a;
        a.tdom_dir = tdom_dir;
        a.gcp_csv = gcps;
        a.out_dir = out;
        a.anchor_a = anchor.first;
        a.anchor_b = anchor.second;
        return dump(cli::cmd_eval_gcp(a));
      },
      py::arg("tdom_dir"), py::arg("gcp_csv"), py::arg("out_dir"), py::arg("anchor"));
  m.def(
      "cmd_depth_edges",
      [](const fs::path &tdom_dir, const fs::path &out) {
        cli::DepthEdgesArgs a;
        a.tdom_dir = tdom_dir;
        a.out_dir = out;
        return dump(cli::cmd_depth_edges(a));
      },
      py::arg("tdom_dir"), py::arg("out_dir"));

  py::register_exception<cli::StageError>(m, "StageError", PyExc_RuntimeError);
}
