#include "lunarforge/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lunarforge/error.hpp"
#include "lunarforge/io.hpp"
#include "lunarforge/parallel.hpp"
#include "lunarforge/rng.hpp"

namespace fs = std::filesystem;

namespace lunarforge {

using io::Json;

void to_json(Json& j, const PairRecord& r) {
  j = {{"pair_id", r.pair_id},
       {"trajectory", r.trajectory},
       {"lighting", r.lighting},
       {"paths",
        {{"image_a", r.paths.image_a},
         {"image_b", r.paths.image_b},
         {"depth_a", r.paths.depth_a},
         {"depth_b", r.paths.depth_b},
         {"pointmap_a", r.paths.pointmap_a},
         {"pointmap_b", r.paths.pointmap_b},
         {"correspondences", r.paths.correspondences},
         {"meta", r.paths.meta}}},
       {"gsd_m", r.gsd_m},
       {"baseline_m", r.baseline_m},
       {"altitude_m", r.altitude_m},
       {"correspondence_count", r.correspondence_count},
       {"overlap", r.overlap},
       {"site", {{"latitude_deg", r.site.latitude_deg}, {"longitude_deg", r.site.longitude_deg}}}};
}

void from_json(const Json& j, PairRecord& r) {
  r.pair_id = j.at("pair_id").get<std::string>();
  r.trajectory = j.at("trajectory").get<TrajectorySpec>();
  r.lighting = j.at("lighting").get<std::string>();
  const Json& p = j.at("paths");
  r.paths = {p.at("image_a"),    p.at("image_b"),    p.at("depth_a"),         p.at("depth_b"),
             p.at("pointmap_a"), p.at("pointmap_b"), p.at("correspondences"), p.at("meta")};
  r.gsd_m = j.at("gsd_m").get<double>();
  r.baseline_m = j.at("baseline_m").get<double>();
  r.altitude_m = j.at("altitude_m").get<double>();
  r.correspondence_count = j.value("correspondence_count", std::size_t{0});
  r.overlap = j.value("overlap", 0.0);
  if (j.contains("site")) {
    r.site.latitude_deg = j["site"].at("latitude_deg").get<double>();
    r.site.longitude_deg = j["site"].at("longitude_deg").get<double>();
  }
}

std::string make_pair_id(TrajectoryKind kind, std::size_t band, std::size_t index, const std::string& lighting) {
  char idx[16];
  std::snprintf(idx, sizeof idx, "%03zu", index);
  return to_string(kind) + "_b" + std::to_string(band) + "_p" + idx + "_" + lighting;
}

DemGrid synth_dem_for(TrajectoryKind kind, std::size_t band, std::uint64_t seed, std::size_t size,
                      const SamplerOptions& opts) {
  if (size < 16) throw Error(Errc::usage, "synthetic DEM size must be at least 16");
  const double half = required_half_extent(kind, band, opts);
  CraterSynthParams p;
  p.seed = seed;
  p.width = size;
  p.height = size;
  p.cell_size = 2.0 * half / static_cast<double>(size - 1);
  return synth_crater_dem(p);
}

// ---------------------------------------------------------------- products

namespace {

Json raster_sidecar(std::size_t w, std::size_t h, std::size_t channels) {
  return {{"width", w},           {"height", h},          {"channels", channels},
          {"dtype", "float32"},   {"byte_order", "little"}, {"layout", "row-major"},
          {"units", "meters"},    {"nodata", "NaN"}};
}

void merge(Json& into, const Json& extra) {
  if (extra.is_object())
    for (auto it = extra.begin(); it != extra.end(); ++it) into[it.key()] = it.value();
}

std::pair<std::size_t, std::size_t> sidecar_shape(const Json& s, std::size_t channels) {
  const auto w = s.at("width").get<std::size_t>();
  const auto h = s.at("height").get<std::size_t>();
  if (s.value("channels", std::size_t{1}) != channels)
    throw Error(Errc::parse_error, "sidecar declares " + std::to_string(s.value("channels", 1)) + " channels");
  return {w, h};
}

}  // namespace

void write_depth(const fs::path& path, const RasterD& depth, const Json& extra) {
  Json side = raster_sidecar(depth.width(), depth.height(), 1);
  side["kind"] = "ray_depth";
  merge(side, extra);
  io::write_f32(path, depth.values());
  io::write_json(io::sidecar_path(path), side);
}

RasterD read_depth(const fs::path& path) {
  const Json side = io::read_json(io::sidecar_path(path));
  const auto [w, h] = sidecar_shape(side, 1);
  RasterD out(w, h);
  out.storage() = io::read_f32(path, w * h);
  return out;
}

void write_pointmap(const fs::path& path, const PointMap& pm, const Json& extra) {
  Json side = raster_sidecar(pm.width, pm.height, 3);
  side["layout"] = "row-major, xyz interleaved";
  side["frame"] = to_string(pm.frame);
  if (pm.frame == PointFrame::view1) side["reference_pose"] = pm.reference;
  merge(side, extra);
  std::vector<double> flat;
  flat.reserve(pm.points.size() * 3);
  for (const auto& p : pm.points) flat.insert(flat.end(), {p.x(), p.y(), p.z()});
  io::write_f32(path, flat);
  io::write_json(io::sidecar_path(path), side);
}

PointMap read_pointmap(const fs::path& path) {
  const Json side = io::read_json(io::sidecar_path(path));
  const auto [w, h] = sidecar_shape(side, 3);
  const std::vector<double> flat = io::read_f32(path, w * h * 3);
  PointMap pm;
  pm.width = w;
  pm.height = h;
  const std::string frame = side.value("frame", "view1");
  if (frame == "view1") {
    pm.frame = PointFrame::view1;
    if (side.contains("reference_pose")) pm.reference = side["reference_pose"].get<Pose>();
  } else if (frame == "world") {
    pm.frame = PointFrame::world;
  } else {
    throw Error(Errc::parse_error, "unknown pointmap frame '" + frame + "'");
  }
  pm.points.resize(w * h);
  pm.valid_mask = Mask(w, h, 0);
  for (std::size_t i = 0; i < w * h; ++i) {
    pm.points[i] = {flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]};
    pm.valid_mask[i] = pm.points[i].allFinite() ? 1 : 0;
  }
  return pm;
}

void write_correspondences(const fs::path& path, const std::vector<Correspondence>& pairs) {
  std::string s = "u1,v1,u2,v2\n";
  for (const auto& c : pairs) {
    s += io::format_double(c.u1) + ',' + io::format_double(c.v1) + ',' + io::format_double(c.u2) + ',' +
         io::format_double(c.v2) + '\n';
  }
  io::write_text(path, s);
}

std::vector<Correspondence> read_correspondences(const fs::path& path) {
  std::istringstream in(io::read_text(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("u1,v1,u2,v2", 0) != 0)
    throw Error(Errc::parse_error, path.string() + ": missing 'u1,v1,u2,v2' header");
  std::vector<Correspondence> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    double v[4];
    std::istringstream ls(line);
    std::string tok;
    int k = 0;
    while (k < 4 && std::getline(ls, tok, ',')) {
      try {
        std::size_t used = 0;
        v[k] = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw Error(Errc::parse_error, path.string() + ":" + std::to_string(lineno) + ": bad number");
      }
      ++k;
    }
    if (k != 4) throw Error(Errc::parse_error, path.string() + ":" + std::to_string(lineno) + ": expected 4 fields");
    out.push_back({v[0], v[1], v[2], v[3]});
  }
  return out;
}

// ---------------------------------------------------------------- pairs

PairRecord write_pair(const fs::path& root, const fs::path& dir, const std::string& pair_id, const SampledPair& pair,
                      const RenderedPair& render, const DemGrid& dem, const std::string& dem_source,
                      const RenderSettings& settings, std::size_t corr_stride, const Site& site) {
  fs::create_directories(dir);
  const CameraRig& rig = pair.rig;
  const Intrinsics& in = rig.intrinsics;
  const double gsd_m = gsd(pair.spec.altitude_m, in.fov_deg, in.width);

  io::write_pgm16(dir / "image_a.pgm", render.a.image);
  io::write_pgm16(dir / "image_b.pgm", render.b.image);
  write_depth(dir / "depth_a.f32", render.a.depth, {{"intrinsics", in}, {"pose", rig.pose_a}, {"gsd_m", gsd_m}});
  write_depth(dir / "depth_b.f32", render.b.depth, {{"intrinsics", in}, {"pose", rig.pose_b}, {"gsd_m", gsd_m}});
  const PointMap pa = depth_to_pointmap(render.a, PointFrame::view1, rig.pose_a);
  const PointMap pb = depth_to_pointmap(render.b, PointFrame::view1, rig.pose_a);
  write_pointmap(dir / "pointmap_a.f32", pa, {{"view", "a"}, {"gsd_m", gsd_m}});
  write_pointmap(dir / "pointmap_b.f32", pb, {{"view", "b"}, {"gsd_m", gsd_m}});
  const CorrespondenceSet corr = gt_correspondences(render.a, render.b, corr_stride);
  write_correspondences(dir / "correspondences.csv", corr.pairs);

  const Pose rel = relative_pose(rig.pose_a, rig.pose_b);
  const double baseline_m = (rig.pose_b.translation() - rig.pose_a.translation()).norm();
  io::write_json(dir / "pose_rel.json", Json(rel));
  io::write_json(dir / "trajectory.json", Json(pair.spec));
  Json meta = {{"pair_id", pair_id},
               {"intrinsics", in},
               {"pose_a", rig.pose_a},
               {"pose_b", rig.pose_b},
               {"pose_rel", rel},
               {"baseline_m", baseline_m},
               {"sun", settings.sun},
               {"hapke", settings.hapke},
               {"psf_sigma", rig.psf_sigma},
               {"rays_per_pixel", rig.rays_per_pixel},
               {"render_seed", settings.seed},
               {"gain", render.a.gain},
               {"reference_height_m", pair.reference_height},
               {"overlap_a", pair.overlap_a},
               {"overlap_b", pair.overlap_b},
               {"correspondence_stride", corr_stride},
               {"site", {{"latitude_deg", site.latitude_deg}, {"longitude_deg", site.longitude_deg}}},
               {"dem",
                {{"source", dem_source},
                 {"width", dem.width()},
                 {"height", dem.height()},
                 {"cell_size", dem.cell_size()},
                 {"origin_x", dem.origin_x()},
                 {"origin_y", dem.origin_y()},
                 {"frame_note", dem.frame_note()}}}};
  io::write_json(dir / "meta.json", meta);

  const fs::path rel_dir = fs::relative(dir, root);
  auto p = [&](const char* name) { return (rel_dir / name).generic_string(); };
  PairRecord r;
  r.pair_id = pair_id;
  r.trajectory = pair.spec;
  r.lighting = pair.spec.lighting;
  r.paths = {p("image_a.pgm"),    p("image_b.pgm"),    p("depth_a.f32"),         p("depth_b.f32"),
             p("pointmap_a.f32"), p("pointmap_b.f32"), p("correspondences.csv"), p("meta.json")};
  r.gsd_m = gsd_m;
  r.baseline_m = baseline_m;
  r.altitude_m = pair.spec.altitude_m;
  r.correspondence_count = corr.pairs.size();
  r.overlap = std::min(pair.overlap_a, pair.overlap_b);
  r.site = site;
  return r;
}

namespace {

void validate(const GenerateOptions& o) {
  if (o.bands.empty()) throw Error(Errc::usage, "at least one band is required");
  for (std::size_t b : o.bands)
    if (b >= kBandAltitudes.size()) throw Error(Errc::usage, "band index " + std::to_string(b) + " is outside 0..9");
  if (o.pairs_per_band == 0) throw Error(Errc::usage, "--pairs must be at least 1");
  if (o.lighting.empty()) throw Error(Errc::usage, "at least one lighting preset is required");
  for (const auto& l : o.lighting) lighting_preset(l);
  if (o.width < 16) throw Error(Errc::usage, "render width must be at least 16");
  if (!(o.fov_deg > 0.0 && o.fov_deg < 170.0)) throw Error(Errc::usage, "field of view must lie in (0, 170)");
  if (o.corr_stride == 0) throw Error(Errc::usage, "correspondence stride must be positive");
  if (o.stress == StressCase::disjoint && !o.allow_disjoint)
    throw Error(Errc::usage, "--stress disjoint requires --allow-disjoint");
  if (o.out.empty()) throw Error(Errc::usage, "an output directory is required");
}

SamplerOptions sampler_options(const GenerateOptions& o) {
  SamplerOptions so;
  so.intrinsics = Intrinsics::from_fov(o.width, o.width, o.fov_deg);
  so.psf_sigma = o.psf_sigma;
  so.rays_per_pixel = o.psf_sigma == 0.0 ? 1 : o.rays_per_pixel;
  so.lighting = o.lighting.front();
  so.allow_disjoint = o.allow_disjoint;
  so.stress = o.stress;
  return so;
}

// Prepares an empty staging directory beside `out`.
fs::path begin_staging(const GenerateOptions& o) {
  if (fs::exists(o.out)) {
    if (!fs::is_directory(o.out)) throw Error(Errc::io_error, o.out.string() + " exists and is not a directory");
    if (!fs::is_empty(o.out) && !o.overwrite)
      throw Error(Errc::usage, o.out.string() + " is not empty (pass --overwrite to replace it)");
  }
  fs::path parent = o.out.parent_path();
  if (parent.empty()) parent = ".";
  fs::create_directories(parent);
  const fs::path staging = parent / ("." + o.out.filename().string() + ".staging");
  fs::remove_all(staging);
  fs::create_directories(staging);
  return staging;
}

void finish_staging(const fs::path& staging, const fs::path& out) {
  if (fs::exists(out)) fs::remove_all(out);
  fs::rename(staging, out);
}

struct Geometry {
  std::uint64_t seed;
  std::optional<DemGrid> synth;
  SampledPair pair;
  Site site;
};

Geometry make_geometry(const GenerateOptions& o, const SamplerOptions& so, const DemGrid* loaded, std::size_t band,
                       std::size_t index) {
  const std::uint64_t gseed = hash_combine(hash_combine(o.seed, band), index);
  Geometry g{gseed, std::nullopt, {}, sample_site(gseed)};
  if (!loaded) g.synth.emplace(synth_dem_for(o.kind, band, hash_combine(gseed, 0xDE5ull), o.dem_size, so));
  const DemGrid& dem = loaded ? *loaded : *g.synth;
  g.pair = sample_pair(o.kind, gseed, band, dem, so);
  return g;
}

}  // namespace

std::vector<PairRecord> cmd_generate(const GenerateOptions& o) {
  validate(o);
  const SamplerOptions so = sampler_options(o);
  std::optional<DemGrid> loaded;
  std::string dem_source = "synthetic";
  if (o.dem_path) {
    loaded.emplace(load_dem(*o.dem_path, o.dem_format));
    dem_source = o.dem_path->filename().string();
  }
  const fs::path staging = begin_staging(o);
  try {
    Json header = {{"type", "header"},
                   {"version", kManifestVersion},
                   {"build_id", kBuildId},
                   {"seed", o.seed},
                   {"kind", to_string(o.kind)},
                   {"bands", o.bands},
                   {"pairs_per_band", o.pairs_per_band},
                   {"lighting", o.lighting},
                   {"width", o.width},
                   {"fov_deg", o.fov_deg},
                   {"psf_sigma", so.psf_sigma},
                   {"rays_per_pixel", so.rays_per_pixel},
                   {"stress", to_string(o.stress)},
                   {"dem", o.dem_path ? Json{{"source", dem_source}} : Json{{"source", "synthetic"}, {"size", o.dem_size}}}};
    std::string manifest = io::dump_line(header);
    std::vector<PairRecord> records;
    RenderSettings rs;
    rs.workers = o.workers == 0 ? default_worker_count() : o.workers;
    for (std::size_t band : o.bands) {
      for (std::size_t index = 0; index < o.pairs_per_band; ++index) {
        Geometry g = make_geometry(o, so, loaded ? &*loaded : nullptr, band, index);
        const DemGrid& dem = loaded ? *loaded : *g.synth;
        for (const std::string& light : o.lighting) {
          SampledPair pair = g.pair;
          pair.spec.lighting = light;
          rs.sun = lighting_preset(light);
          rs.seed = g.seed;
          const RenderedPair render = render_pair(dem, pair.rig, rs);
          const std::string id = make_pair_id(o.kind, band, index, light);
          PairRecord rec = write_pair(staging, staging / "pairs" / id, id, pair, render, dem, dem_source, rs,
                                      o.corr_stride, g.site);
          manifest += io::dump_line(Json(rec));
          records.push_back(std::move(rec));
        }
      }
    }
    io::write_text(staging / "manifest.jsonl", manifest);
    finish_staging(staging, o.out);
    return records;
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
}

PairRecord cmd_render_pair(const RenderPairOptions& opts) {
  GenerateOptions o = opts.base;
  o.bands = {opts.band};
  o.lighting.resize(1);
  validate(o);
  const SamplerOptions so = sampler_options(o);
  std::optional<DemGrid> loaded;
  std::string dem_source = "synthetic";
  if (o.dem_path) {
    loaded.emplace(load_dem(*o.dem_path, o.dem_format));
    dem_source = o.dem_path->filename().string();
  }
  const fs::path staging = begin_staging(o);
  try {
    Geometry g = make_geometry(o, so, loaded ? &*loaded : nullptr, opts.band, opts.index);
    const DemGrid& dem = loaded ? *loaded : *g.synth;
    RenderSettings rs;
    rs.workers = o.workers == 0 ? default_worker_count() : o.workers;
    rs.sun = lighting_preset(o.lighting.front());
    rs.seed = g.seed;
    const RenderedPair render = render_pair(dem, g.pair.rig, rs);
    const std::string id = make_pair_id(o.kind, opts.band, opts.index, o.lighting.front());
    PairRecord rec = write_pair(staging, staging, id, g.pair, render, dem, dem_source, rs, o.corr_stride, g.site);
    io::write_json(staging / "record.json", Json(rec));
    finish_staging(staging, o.out);
    return rec;
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
}

// ---------------------------------------------------------------- visualize

VisualizeMode parse_visualize_mode(const std::string& name) {
  if (name == "hillshade") return VisualizeMode::hillshade;
  if (name == "slope") return VisualizeMode::slope;
  throw Error(Errc::usage, "unknown visualization mode '" + name + "'");
}

RasterD load_elevation(const fs::path& input, double* spacing_from_sidecar) {
  const Json side = io::read_json(io::sidecar_path(input));
  if (spacing_from_sidecar && side.contains("gsd_m")) *spacing_from_sidecar = side["gsd_m"].get<double>();
  if (side.value("channels", std::size_t{1}) == 3) {
    const PointMap pm = read_pointmap(input);
    RasterD elev(pm.width, pm.height, std::numeric_limits<double>::quiet_NaN());
    const bool to_world = pm.frame == PointFrame::view1 && side.contains("reference_pose");
    for (std::size_t i = 0; i < pm.points.size(); ++i) {
      if (!pm.valid_mask[i]) continue;
      elev[i] = to_world ? pm.reference.to_world(pm.points[i]).z() : pm.points[i].z();
    }
    return elev;
  }
  RasterD d = read_depth(input);
  for (double& v : d.storage()) v = -v;
  return d;
}

Raster<std::uint8_t> visualize(const RasterD& elevation, double spacing, VisualizeMode mode, double sun_azimuth,
                               double sun_elevation) {
  Raster<std::uint8_t> out(elevation.width(), elevation.height(), 0);
  if (mode == VisualizeMode::hillshade) {
    const RasterD shade = hillshade(elevation, spacing, sun_azimuth, sun_elevation);
    for (std::size_t i = 0; i < shade.size(); ++i)
      if (std::isfinite(shade[i])) out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(shade[i], 0.0, 1.0) * 255.0));
  } else {
    const SlopeMap s = slope_map(elevation, spacing);
    for (std::size_t i = 0; i < s.slopes.size(); ++i)
      if (std::isfinite(s.slopes[i]))
        out[i] = static_cast<std::uint8_t>(std::lround(std::min(s.slopes[i], 45.0) / 45.0 * 255.0));
  }
  return out;
}

void cmd_visualize(const VisualizeOptions& opts) {
  double spacing = 1.0;
  const RasterD elev = load_elevation(opts.input, &spacing);
  if (opts.spacing) spacing = *opts.spacing;
  io::write_pgm8(opts.out, visualize(elev, spacing, opts.mode, opts.sun_azimuth, opts.sun_elevation));
}

}  // namespace lunarforge
