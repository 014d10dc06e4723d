#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lunarforge/camera.hpp"
#include "lunarforge/radiometry.hpp"
#include "lunarforge/terrain.hpp"

namespace lunarforge {

enum class TrajectoryKind { nadir, oblique, dynamic };

std::string to_string(TrajectoryKind kind);
TrajectoryKind parse_trajectory_kind(const std::string& name);

// Altitude band centers in meters (3.5 km ... 30.5 km).
inline constexpr std::array<double, 10> kBandAltitudes = {3500.0,  6200.0,  9500.0,  12800.0, 16100.0,
                                                          19400.0, 22700.0, 26000.0, 29200.0, 30500.0};
inline constexpr double kBandJitter = 0.05;

// Oblique "same / slightly higher / significantly higher" altitude modes.
inline constexpr std::array<double, 3> kObliqueAltitudeModes = {0.0, 0.05, 0.15};

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::nadir;
  double altitude_m = 0.0;
  double baseline_frac = 0.0;
  double tilt_deg = 0.0;
  double roll_deg = 0.0;
  double altitude_delta_frac = 0.0;
  double heading_deg = 0.0;
  std::string lighting = "side";
  std::uint64_t seed = 0;

  bool operator==(const TrajectorySpec&) const = default;
};

void to_json(nlohmann::json& j, const TrajectorySpec& s);
void from_json(const nlohmann::json& j, TrajectorySpec& s);

// Supplementary stress geometries. `same_pose` puts both cameras at one pose;
// `disjoint` separates nadir footprints so they share no terrain.
enum class StressCase { none, same_pose, disjoint };
StressCase parse_stress_case(const std::string& name);
std::string to_string(StressCase stress);

struct SamplerOptions {
  Intrinsics intrinsics = Intrinsics::from_fov(128, 128, 45.0);
  double psf_sigma = 0.5;
  std::size_t rays_per_pixel = 4;
  std::string lighting = "side";
  bool allow_disjoint = false;
  StressCase stress = StressCase::none;
  double min_overlap = 0.30;
  int max_attempts = 64;
};

struct SampledPair {
  TrajectorySpec spec;
  CameraRig rig;
  double reference_height = 0.0;  // mean terrain height under the footprint
  double overlap_a = 0.0;         // shared footprint area / footprint area of a
  double overlap_b = 0.0;
};

/// Random draws for one pair; independent of any DEM.
TrajectorySpec sample_spec(TrajectoryKind kind, std::uint64_t seed, std::size_t band_index, const SamplerOptions& opts,
                           int attempt = 0);

/// Places both cameras over `dem` according to `spec`. Throws
/// footprint_too_small if a frustum corner leaves the footprint.
SampledPair build_pair(const TrajectorySpec& spec, const DemGrid& dem, const SamplerOptions& opts);

/// Samples until the footprints overlap (unless allow_disjoint) and both
/// cameras clear the terrain. Deterministic in (kind, seed, band).
SampledPair sample_pair(TrajectoryKind kind, std::uint64_t seed, std::size_t band_index, const DemGrid& dem,
                        const SamplerOptions& opts = {});

/// Half-width of a square DEM footprint, centered under the look-at point,
/// that contains every frustum the sampler can draw for this kind and band.
double required_half_extent(TrajectoryKind kind, std::size_t band_index, const SamplerOptions& opts = {});

SunConfig lighting_preset(const std::string& id);
const std::vector<std::string>& lighting_preset_ids();

struct Site {
  double latitude_deg = 0.0;
  double longitude_deg = 0.0;
};
Site sample_site(std::uint64_t seed);

// Ground footprint of a camera on the plane z = height (image corners).
std::vector<Eigen::Vector2d> ground_footprint(const Intrinsics& intr, const Pose& pose, double height);
double polygon_area(const std::vector<Eigen::Vector2d>& poly);
// Intersection of two convex polygons.
std::vector<Eigen::Vector2d> clip_convex(const std::vector<Eigen::Vector2d>& subject,
                                         const std::vector<Eigen::Vector2d>& clip);

}  // namespace lunarforge
