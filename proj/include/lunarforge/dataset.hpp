#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lunarforge/renderer.hpp"
#include "lunarforge/terrain.hpp"
#include "lunarforge/trajectory.hpp"

namespace lunarforge {

inline constexpr const char* kBuildId = "lunarforge-0.3.0";
inline constexpr int kManifestVersion = 1;

struct PairPaths {
  std::string image_a, image_b, depth_a, depth_b, pointmap_a, pointmap_b, correspondences, meta;
};

struct PairRecord {
  std::string pair_id;
  TrajectorySpec trajectory;
  std::string lighting;
  PairPaths paths;
  double gsd_m = 0.0;
  double baseline_m = 0.0;
  double altitude_m = 0.0;
  std::size_t correspondence_count = 0;
  double overlap = 0.0;  // min of the two footprint overlap fractions
  Site site;
};

void to_json(nlohmann::json& j, const PairRecord& r);
void from_json(const nlohmann::json& j, PairRecord& r);

struct GenerateOptions {
  std::optional<std::filesystem::path> dem_path;  // unset: synthesize per geometry
  DemFormat dem_format = DemFormat::ascii_grid;
  std::size_t dem_size = 512;
  TrajectoryKind kind = TrajectoryKind::nadir;
  std::vector<std::size_t> bands{0};
  std::size_t pairs_per_band = 1;
  std::vector<std::string> lighting{"side", "overhead", "back"};
  std::uint64_t seed = 0;
  std::size_t width = 128;
  double fov_deg = 45.0;
  double psf_sigma = 0.5;
  std::size_t rays_per_pixel = 4;
  std::size_t corr_stride = 1;
  StressCase stress = StressCase::none;
  bool allow_disjoint = false;
  bool overwrite = false;
  std::size_t workers = 0;
  std::filesystem::path out;
};

std::string make_pair_id(TrajectoryKind kind, std::size_t band, std::size_t index, const std::string& lighting);

// Synthetic terrain sized for the frusta of (kind, band), centered on the origin.
DemGrid synth_dem_for(TrajectoryKind kind, std::size_t band, std::uint64_t seed, std::size_t size,
                      const SamplerOptions& opts);

/// Renders every (band, pair, lighting) combination into `opts.out`. Outputs
/// are staged next to the target and moved into place only on success.
std::vector<PairRecord> cmd_generate(const GenerateOptions& opts);

struct RenderPairOptions {
  GenerateOptions base;  // dem, kind, seed, resolution, stress
  std::size_t band = 0;
  std::size_t index = 0;
};
/// One pair, one lighting, written straight into `base.out` (no manifest).
PairRecord cmd_render_pair(const RenderPairOptions& opts);

// Writes one rendered pair and its ground truth into `dir`. Paths in the
// returned record are relative to `root`.
PairRecord write_pair(const std::filesystem::path& root, const std::filesystem::path& dir, const std::string& pair_id,
                      const SampledPair& pair, const RenderedPair& render, const DemGrid& dem,
                      const std::string& dem_source, const RenderSettings& settings, std::size_t corr_stride,
                      const Site& site);

// Product files: raw little-endian float32 plus a JSON sidecar.
void write_depth(const std::filesystem::path& path, const RasterD& depth, const nlohmann::json& extra = {});
RasterD read_depth(const std::filesystem::path& path);
void write_pointmap(const std::filesystem::path& path, const PointMap& pm, const nlohmann::json& extra = {});
PointMap read_pointmap(const std::filesystem::path& path);
void write_correspondences(const std::filesystem::path& path, const std::vector<Correspondence>& pairs);
std::vector<Correspondence> read_correspondences(const std::filesystem::path& path);

enum class VisualizeMode { hillshade, slope };
VisualizeMode parse_visualize_mode(const std::string& name);

struct VisualizeOptions {
  std::filesystem::path input;  // depth or pointmap .f32 with sidecar
  VisualizeMode mode = VisualizeMode::hillshade;
  double sun_azimuth = 315.0;
  double sun_elevation = 45.0;
  std::optional<double> spacing;  // default: sidecar gsd_m, else 1
  std::filesystem::path out;
};

// Elevation raster derived from a depth map (negated depth) or a pointmap
// (world z when its sidecar carries the reference pose).
RasterD load_elevation(const std::filesystem::path& input, double* spacing_from_sidecar = nullptr);
Raster<std::uint8_t> visualize(const RasterD& elevation, double spacing, VisualizeMode mode, double sun_azimuth,
                               double sun_elevation);
void cmd_visualize(const VisualizeOptions& opts);

}  // namespace lunarforge
