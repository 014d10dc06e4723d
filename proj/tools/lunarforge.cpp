// lunarforge: lunar stereo dataset generation and evaluation.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lunarforge/dataset.hpp"
#include "lunarforge/error.hpp"
#include "lunarforge/evaluate.hpp"
#include "lunarforge/io.hpp"

namespace fs = std::filesystem;
using namespace lunarforge;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

int report_error(const std::string& code, const std::string& message, int exit_code) {
  nlohmann::json j = {{"error", code}, {"message", message}};
  std::cerr << j.dump() << '\n';
  return exit_code;
}

struct SceneFlags {
  std::string dem;
  std::string dem_format = "ascii_grid";
  bool synth = false;
  std::size_t dem_size = 512;
  std::string trajectory;
  std::uint64_t seed = 0;
  std::size_t full_res = 0;
  std::size_t width = 128;
  double fov = 45.0;
  double psf_sigma = 0.5;
  std::size_t rays = 4;
  std::size_t corr_stride = 1;
  std::string stress = "none";
  bool allow_disjoint = false;
  bool overwrite = false;
  std::size_t threads = 0;
  std::string out;

  void attach(CLI::App* app) {
    app->add_option("--dem", dem, "DEM file (default: synthesize terrain per pair)");
    app->add_option("--dem-format", dem_format, "ascii_grid or raw_f32");
    app->add_flag("--synth", synth, "synthesize a crater DEM per pair");
    app->add_option("--dem-size", dem_size, "synthetic DEM size in cells");
    app->add_option("--trajectory", trajectory, "nadir, oblique or dynamic")->required();
    app->add_option("--seed", seed, "random seed");
    app->add_option("--full-res", full_res, "render width/height (512 for full resolution)");
    app->add_option("--width", width, "render width/height");
    app->add_option("--fov", fov, "horizontal field of view, degrees");
    app->add_option("--psf-sigma", psf_sigma, "Gaussian PSF sigma, pixels (0 = pinhole)");
    app->add_option("--rays", rays, "rays per pixel");
    app->add_option("--corr-stride", corr_stride, "pixel stride of ground-truth correspondences");
    app->add_option("--stress", stress, "none, same-pose or disjoint");
    app->add_flag("--allow-disjoint", allow_disjoint, "permit non-overlapping footprints");
    app->add_flag("--overwrite", overwrite, "replace a non-empty output directory");
    app->add_option("--threads", threads, "worker threads (default: LUNARFORGE_THREADS or all cores)");
    app->add_option("--out", out, "output directory")->required();
  }

  GenerateOptions options() const {
    if (synth && !dem.empty()) throw Error(Errc::usage, "--synth and --dem are mutually exclusive");
    GenerateOptions o;
    if (!dem.empty()) {
      o.dem_path = dem;
      o.dem_format = parse_dem_format(dem_format);
    }
    o.dem_size = dem_size;
    o.kind = parse_trajectory_kind(trajectory);
    o.seed = seed;
    o.width = full_res ? full_res : width;
    o.fov_deg = fov;
    o.psf_sigma = psf_sigma;
    o.rays_per_pixel = psf_sigma == 0.0 ? 1 : rays;
    o.corr_stride = corr_stride;
    o.stress = parse_stress_case(stress);
    o.allow_disjoint = allow_disjoint;
    o.overwrite = overwrite;
    o.workers = threads;
    o.out = out;
    return o;
  }
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<double> parse_doubles(const std::string& s, const char* what) {
  std::vector<double> out;
  for (const auto& tok : split_list(s)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw Error(Errc::usage, std::string("bad ") + what + " value '" + tok + "'");
    }
  }
  return out;
}

std::vector<std::size_t> parse_indices(const std::string& s, const char* what) {
  std::vector<std::size_t> out;
  for (const auto& tok : split_list(s)) {
    if (tok.find_first_not_of("0123456789") != std::string::npos)
      throw Error(Errc::usage, std::string("bad ") + what + " value '" + tok + "'");
    out.push_back(std::stoul(tok));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lunarforge: synthetic lunar stereo pairs with ground truth, and geometric evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kBuildId);

  // generate
  SceneFlags gen;
  std::string gen_bands = "0";
  std::size_t gen_pairs = 1;
  std::string gen_lighting = "side,overhead,back";
  auto* generate = app.add_subcommand("generate", "render a dataset of stereo pairs");
  gen.attach(generate);
  generate->add_option("--bands", gen_bands, "comma-separated altitude band indices (0-9)");
  generate->add_option("--pairs", gen_pairs, "pairs per band");
  generate->add_option("--lighting", gen_lighting, "comma-separated presets: side, overhead, back");

  // render-pair
  SceneFlags rp;
  std::size_t rp_band = 0, rp_index = 0;
  std::string rp_lighting = "side";
  auto* render = app.add_subcommand("render-pair", "render one stereo pair into a directory");
  rp.attach(render);
  render->add_option("--band", rp_band, "altitude band index (0-9)");
  render->add_option("--index", rp_index, "pair index within the band");
  render->add_option("--lighting", rp_lighting, "lighting preset");

  // evaluate
  EvaluateOptions ev;
  std::string ev_thresholds = "2,5,15,30";
  std::string ev_report;
  std::string ev_gt, ev_pred;
  auto* evaluate = app.add_subcommand("evaluate", "score predicted pointmaps and poses against a dataset");
  evaluate->add_option("--gt", ev_gt, "ground-truth dataset directory")->required();
  evaluate->add_option("--pred", ev_pred, "prediction directory")->required();
  evaluate->add_option("--thresholds", ev_thresholds, "comma-separated angular thresholds, degrees");
  evaluate->add_option("--seed", ev.seed, "RANSAC seed");
  evaluate->add_option("--report", ev_report, "JSON-lines report path (default: stdout)");
  evaluate->add_option("--profiles", ev.n_profiles, "depth profiles per pair");
  evaluate->add_option("--threads", ev.workers, "worker threads");

  // synth-dem
  CraterSynthParams sd;
  std::string sd_format = "ascii_grid", sd_out;
  std::size_t sd_size = 512;
  auto* synth = app.add_subcommand("synth-dem", "write a synthetic cratered DEM");
  synth->add_option("--seed", sd.seed, "random seed");
  synth->add_option("--size", sd_size, "width and height in cells");
  synth->add_option("--cell-size", sd.cell_size, "meters per cell");
  synth->add_option("--craters", sd.crater_count, "number of craters");
  synth->add_option("--octaves", sd.fractal_octaves, "fractal noise octaves");
  synth->add_option("--format", sd_format, "ascii_grid or raw_f32");
  synth->add_option("--out", sd_out, "output file")->required();

  // visualize
  VisualizeOptions vz;
  std::string vz_mode = "hillshade", vz_in, vz_out;
  std::optional<double> vz_spacing;
  auto* vis = app.add_subcommand("visualize", "hillshade or slope image of a depth map or pointmap");
  vis->add_option("--input", vz_in, "depth or pointmap .f32 with JSON sidecar")->required();
  vis->add_option("--mode", vz_mode, "hillshade or slope");
  vis->add_option("--sun-azimuth", vz.sun_azimuth, "degrees clockwise from north");
  vis->add_option("--sun-elevation", vz.sun_elevation, "degrees above the horizon");
  vis->add_option("--spacing", vz_spacing, "raster spacing, meters (default: sidecar gsd_m)");
  vis->add_option("--out", vz_out, "output PGM")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), kExitUsage);
  }

  try {
    if (*generate) {
      GenerateOptions o = gen.options();
      o.bands = parse_indices(gen_bands, "band");
      o.pairs_per_band = gen_pairs;
      o.lighting = split_list(gen_lighting);
      const auto records = cmd_generate(o);
      std::cout << nlohmann::json{{"pairs", records.size()}, {"out", o.out.string()}}.dump() << '\n';
    } else if (*render) {
      RenderPairOptions o;
      o.base = rp.options();
      o.base.lighting = {rp_lighting};
      o.band = rp_band;
      o.index = rp_index;
      const PairRecord rec = cmd_render_pair(o);
      std::cout << nlohmann::json(rec).dump() << '\n';
    } else if (*evaluate) {
      ev.gt = ev_gt;
      ev.pred = ev_pred;
      ev.thresholds = parse_doubles(ev_thresholds, "threshold");
      if (!ev_report.empty()) ev.report = ev_report;
      const auto lines = cmd_evaluate(ev);
      if (ev_report.empty()) {
        for (const auto& l : lines) std::cout << io::dump_line(l);
      } else {
        std::cout << io::dump_line(lines.back());
      }
      if (lines.back().value("warning", false)) std::cerr << "warning: some pairs were missing or failed\n";
    } else if (*synth) {
      sd.width = sd_size;
      sd.height = sd_size;
      const DemGrid dem = synth_crater_dem(sd);
      write_dem(dem, sd_out, parse_dem_format(sd_format));
      if (auto w = dem.lunar_range_warning()) std::cerr << "warning: " << *w << '\n';
    } else if (*vis) {
      vz.input = vz_in;
      vz.out = vz_out;
      vz.mode = parse_visualize_mode(vz_mode);
      vz.spacing = vz_spacing;
      cmd_visualize(vz);
    }
  } catch (const Error& e) {
    return report_error(std::string(errc_name(e.code())), e.what(),
                        e.code() == Errc::usage ? kExitUsage : kExitRuntime);
  } catch (const std::exception& e) {
    return report_error("runtime", e.what(), kExitRuntime);
  }
  return 0;
}
