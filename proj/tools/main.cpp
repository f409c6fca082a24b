#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace orthosplat;

namespace {

// "RxC" with positive integers.
std::string parse_grid(const std::string &text, int &rows, int &cols) {
  const auto x = text.find('x');
  try {
    if (x == std::string::npos)
      throw std::invalid_argument(text);
    std::size_t used_r = 0, used_c = 0;
    rows = std::stoi(text.substr(0, x), &used_r);
    cols = std::stoi(text.substr(x + 1), &used_c);
    if (used_r != x || used_c != text.size() - x - 1 || rows < 1 || cols < 1)
      throw std::invalid_argument(text);
  } catch (const std::exception &) {
    return "expected ROWSxCOLS, got '" + text + "'";
  }
  return {};
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"True orthophoto and depth rendering from 2D Gaussian splat scenes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cli::kToolVersion);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads for all stages (0 = logical cores)")
      ->capture_default_str();

  cli::PartitionArgs part;
  auto *p = app.add_subcommand("partition", "Split a COLMAP model into camera-balanced cells");
  p->add_option("--colmap", part.colmap_dir, "COLMAP text model directory")->required();
  p->add_option("--out", part.out_dir, "Output directory")->required();
  p->add_option("--cols", part.cols, "Cells along x")->capture_default_str();
  p->add_option("--rows", part.rows, "Cells along y per column")->capture_default_str();
  p->add_option("--ratio", part.ratio, "Boundary expansion ratio")->capture_default_str();
  p->add_option("--threshold", part.threshold, "Visibility threshold")->capture_default_str();
  p->add_option("--align", part.align, "Manhattan alignment: none or auto")->capture_default_str();

  cli::RenderArgs render;
  std::string tiles = "1x1";
  auto *r = app.add_subcommand("render", "Render TDOM color and depth products from a splat PLY");
  r->add_option("--ply", render.ply, "Splat PLY")->required();
  r->add_option("--out", render.out_dir, "Output directory")->required();
  r->add_option("--gsd", render.gsd, "Ground sampling distance, meters per pixel")
      ->capture_default_str();
  r->add_option("--tiles", tiles, "Tile grid ROWSxCOLS")->capture_default_str();
  r->add_option("--tiles-in-flight", render.tiles_in_flight, "Tiles rendered concurrently")
      ->capture_default_str();
  r->add_option("--z-margin", render.z_margin, "View-volume margin as a fraction of z extent")
      ->capture_default_str();
  r->add_option("--background", render.background, "Background RGB in [0, 1]")
      ->expected(3)
      ->capture_default_str();

  cli::EvalGcpArgs gcp;
  std::vector<std::string> anchor;
  auto *e = app.add_subcommand("eval-gcp", "GCP pair distance errors against a TDOM");
  e->add_option("--tdom", gcp.tdom_dir, "Directory written by render")->required();
  e->add_option("--gcps", gcp.gcp_csv, "CSV with header id,lat,lon,px,py")->required();
  e->add_option("--anchor", anchor, "Anchor pair used for scale alignment")
      ->expected(2)
      ->required();
  e->add_option("--out", gcp.out_dir, "Output directory")->required();

  cli::DepthEdgesArgs edges;
  auto *d = app.add_subcommand("depth-edges", "Canny edges of the depth map over the TDOM");
  d->add_option("--tdom", edges.tdom_dir, "Directory written by render")->required();
  d->add_option("--out", edges.out_dir, "Output directory")->required();
  d->add_option("--sigma", edges.canny.sigma, "Gaussian blur sigma, pixels")->capture_default_str();
  d->add_option("--low", edges.canny.low, "Hysteresis low threshold")->capture_default_str();
  d->add_option("--high", edges.canny.high, "Hysteresis high threshold")->capture_default_str();

  cli::FitArgs fit;
  auto *f = app.add_subcommand("fit", "Optimize splats against target views (L1 loss)");
  f->add_option("--ply", fit.ply_init, "Initial splat PLY")->required();
  f->add_option("--views", fit.views_dir, "Directory with views.json")->required();
  f->add_option("--out", fit.out_dir, "Output directory")->required();
  f->add_option("--iterations", fit.config.iterations, "Optimizer steps")->capture_default_str();
  f->add_option("--gradient", fit.gradient, "analytic or finite-difference")
      ->capture_default_str();
  f->add_option("--groups", fit.groups, "Parameter groups to optimize")->capture_default_str();
  f->add_option("--lr-position", fit.config.learning_rates.position)->capture_default_str();
  f->add_option("--lr-scale", fit.config.learning_rates.scale_log)->capture_default_str();
  f->add_option("--lr-rotation", fit.config.learning_rates.rotation)->capture_default_str();
  f->add_option("--lr-opacity", fit.config.learning_rates.opacity_logit)->capture_default_str();
  f->add_option("--lr-color", fit.config.learning_rates.color)->capture_default_str();
  f->add_option("--position-eps", fit.config.position_eps, "Finite-difference step, meters")
      ->capture_default_str();
  f->add_option("--param-eps", fit.config.param_eps, "Finite-difference step, other groups")
      ->capture_default_str();
  f->add_option("--final-lr-fraction", fit.config.final_lr_fraction,
                "Learning-rate decay reached at the last step")
      ->capture_default_str();

  cli::ConvertArgs conv;
  auto *c = app.add_subcommand("convert", "Initialize a splat PLY from COLMAP sparse points");
  c->add_option("--colmap", conv.colmap_dir, "COLMAP text model directory")->required();
  c->add_option("--out", conv.out_ply, "Output PLY")->required();
  c->add_option("--align", conv.align, "Manhattan alignment: none or auto")->capture_default_str();
  c->add_option("--opacity", conv.opacity, "Initial opacity")->capture_default_str();
  c->add_option("--neighbors", conv.neighbors, "Neighbors for the initial scale")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &err) {
    return app.exit(err);
  }

  try {
    if (*p) {
      part.threads = threads;
      cli::cmd_partition(part);
    } else if (*r) {
      if (auto msg = parse_grid(tiles, render.tile_rows, render.tile_cols); !msg.empty()) {
        std::cerr << "error: --tiles: " << msg << "\n";
        return 2;
      }
      render.threads = threads;
      cli::cmd_render(render);
    } else if (*e) {
      gcp.anchor_a = anchor.at(0);
      gcp.anchor_b = anchor.at(1);
      gcp.threads = threads;
      cli::cmd_eval_gcp(gcp);
    } else if (*d) {
      edges.threads = threads;
      cli::cmd_depth_edges(edges);
    } else if (*f) {
      fit.threads = threads;
      cli::cmd_fit(fit);
    } else if (*c) {
      conv.threads = threads;
      cli::cmd_convert(conv);
    }
  } catch (const std::exception &ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
