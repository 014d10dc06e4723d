#include "lunarforge/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lunarforge/error.hpp"
#include "lunarforge/rng.hpp"

namespace lunarforge {

namespace {
constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

struct KindLimits {
  double baseline_lo, baseline_hi;
  double tilt_max;
  double delta_max;  // |altitude_delta_frac|
};

KindLimits limits(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::nadir: return {0.04, 0.10, 0.0, 0.0};
    case TrajectoryKind::oblique: return {0.04, 0.10, 35.0, 0.15};
    case TrajectoryKind::dynamic: return {0.05, 0.18, 35.0, 0.30};
  }
  return {0.0, 0.0, 0.0, 0.0};
}

constexpr double kDisjointBaselineFrac = 1.5;

}  // namespace

std::string to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::nadir: return "nadir";
    case TrajectoryKind::oblique: return "oblique";
    case TrajectoryKind::dynamic: return "dynamic";
  }
  return "unknown";
}

TrajectoryKind parse_trajectory_kind(const std::string& name) {
  if (name == "nadir") return TrajectoryKind::nadir;
  if (name == "oblique") return TrajectoryKind::oblique;
  if (name == "dynamic") return TrajectoryKind::dynamic;
  throw Error(Errc::usage, "unknown trajectory kind '" + name + "'");
}

StressCase parse_stress_case(const std::string& name) {
  if (name == "none" || name.empty()) return StressCase::none;
  if (name == "same-pose" || name == "same_pose") return StressCase::same_pose;
  if (name == "disjoint") return StressCase::disjoint;
  throw Error(Errc::usage, "unknown stress case '" + name + "'");
}

std::string to_string(StressCase stress) {
  switch (stress) {
    case StressCase::none: return "none";
    case StressCase::same_pose: return "same-pose";
    case StressCase::disjoint: return "disjoint";
  }
  return "unknown";
}

void to_json(nlohmann::json& j, const TrajectorySpec& s) {
  j = {{"kind", to_string(s.kind)},
       {"altitude_m", s.altitude_m},
       {"baseline_frac", s.baseline_frac},
       {"tilt_deg", s.tilt_deg},
       {"roll_deg", s.roll_deg},
       {"altitude_delta_frac", s.altitude_delta_frac},
       {"heading_deg", s.heading_deg},
       {"lighting", s.lighting},
       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, TrajectorySpec& s) {
  s.kind = parse_trajectory_kind(j.at("kind").get<std::string>());
  s.altitude_m = j.at("altitude_m").get<double>();
  s.baseline_frac = j.at("baseline_frac").get<double>();
  s.tilt_deg = j.at("tilt_deg").get<double>();
  s.roll_deg = j.at("roll_deg").get<double>();
  s.altitude_delta_frac = j.at("altitude_delta_frac").get<double>();
  s.heading_deg = j.at("heading_deg").get<double>();
  s.lighting = j.at("lighting").get<std::string>();
  s.seed = j.at("seed").get<std::uint64_t>();
}

const std::vector<std::string>& lighting_preset_ids() {
  static const std::vector<std::string> ids = {"side", "overhead", "back"};
  return ids;
}

SunConfig lighting_preset(const std::string& id) {
  // (azimuth, elevation) in degrees; the 360 deg back-lighting azimuth wraps to 0.
  if (id == "side") return {150.0, 20.0, 1.0};
  if (id == "overhead") return {250.0, 70.0, 1.0};
  if (id == "back") return {0.0, 15.0, 1.0};
  throw Error(Errc::usage, "unknown lighting preset '" + id + "'");
}

Site sample_site(std::uint64_t seed) {
  Rng rng(hash_combine(seed, 0x517Eull));
  Site s;
  s.latitude_deg = rng.uniform(-90.0, -87.0);
  s.longitude_deg = rng.uniform(0.0, 360.0);
  return s;
}

TrajectorySpec sample_spec(TrajectoryKind kind, std::uint64_t seed, std::size_t band_index, const SamplerOptions& opts,
                           int attempt) {
  if (band_index >= kBandAltitudes.size()) throw Error(Errc::usage, "band index must lie in 0..9");
  Rng rng(hash_combine(hash_combine(seed, static_cast<std::uint64_t>(kind) * 16 + band_index),
                       static_cast<std::uint64_t>(attempt)));
  const KindLimits lim = limits(kind);
  TrajectorySpec s;
  s.kind = kind;
  s.seed = seed;
  s.lighting = opts.lighting;
  s.altitude_m = kBandAltitudes[band_index] * rng.uniform(1.0 - kBandJitter, 1.0 + kBandJitter);
  s.baseline_frac = rng.uniform(lim.baseline_lo, lim.baseline_hi);
  s.heading_deg = rng.uniform(0.0, 360.0);
  switch (kind) {
    case TrajectoryKind::nadir: break;
    case TrajectoryKind::oblique:
      s.tilt_deg = rng.uniform(20.0, 35.0);
      s.altitude_delta_frac = kObliqueAltitudeModes[rng.below(kObliqueAltitudeModes.size())];
      break;
    case TrajectoryKind::dynamic:
      s.tilt_deg = rng.uniform() < 0.5 ? rng.uniform(0.0, 5.0) : rng.uniform(20.0, 35.0);
      s.altitude_delta_frac = rng.uniform(-0.30, 0.30);
      s.roll_deg = rng.uniform(-10.0, 10.0);
      break;
  }
  switch (opts.stress) {
    case StressCase::none: break;
    case StressCase::same_pose:
      s.baseline_frac = 0.0;
      s.altitude_delta_frac = 0.0;
      s.roll_deg = 0.0;
      break;
    case StressCase::disjoint:
      s.baseline_frac = kDisjointBaselineFrac;
      s.tilt_deg = 0.0;
      s.altitude_delta_frac = 0.0;
      s.roll_deg = 0.0;
      break;
  }
  return s;
}

double required_half_extent(TrajectoryKind kind, std::size_t band_index, const SamplerOptions& opts) {
  if (band_index >= kBandAltitudes.size()) throw Error(Errc::usage, "band index must lie in 0..9");
  const KindLimits lim = limits(kind);
  const double a = kBandAltitudes[band_index] * (1.0 + kBandJitter);
  double half_baseline = 0.5 * lim.baseline_hi;
  double tilt = lim.tilt_max;
  double delta = lim.delta_max;
  if (opts.stress == StressCase::disjoint) {
    half_baseline = 0.5 * kDisjointBaselineFrac;
    tilt = 0.0;
    delta = 0.0;
  }
  const Intrinsics& in = opts.intrinsics;
  const double half_diag_px = 0.5 * std::hypot(static_cast<double>(in.width), static_cast<double>(in.height));
  const double diag = std::atan(half_diag_px / in.focal_px);
  const double offset = std::tan(tilt * kDegToRad) + half_baseline;
  double reach = 0.0;
  for (double f : {1.0 - delta, 1.0 + delta}) {
    const double tilt_eff = std::atan(offset / f);
    const double theta = std::min(tilt_eff + diag, 85.0 * kDegToRad);
    reach = std::max(reach, a * (f * std::tan(theta) + offset));
  }
  return 1.1 * reach;
}

std::vector<Eigen::Vector2d> ground_footprint(const Intrinsics& intr, const Pose& pose, double height) {
  const double w = static_cast<double>(intr.width) - 0.5;
  const double h = static_cast<double>(intr.height) - 0.5;
  // Image corners in clockwise image order, which is counter-clockwise on the
  // ground for a downward camera.
  const double corners[4][2] = {{-0.5, -0.5}, {w, -0.5}, {w, h}, {-0.5, h}};
  std::vector<Eigen::Vector2d> poly;
  for (const auto& c : corners) {
    const Ray r = pixel_ray(intr, pose, c[0], c[1]);
    if (!(r.direction.z() < -1e-9)) throw Error(Errc::footprint_too_small, "frustum corner ray misses the ground plane");
    const double s = (height - r.origin.z()) / r.direction.z();
    if (!(s > 0.0)) throw Error(Errc::footprint_too_small, "camera is not above the reference plane");
    const Eigen::Vector3d p = r.origin + s * r.direction;
    poly.emplace_back(p.x(), p.y());
  }
  if (polygon_area(poly) < 0.0) std::reverse(poly.begin(), poly.end());
  return poly;
}

double polygon_area(const std::vector<Eigen::Vector2d>& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

std::vector<Eigen::Vector2d> clip_convex(const std::vector<Eigen::Vector2d>& subject,
                                         const std::vector<Eigen::Vector2d>& clip) {
  std::vector<Eigen::Vector2d> out = subject;
  for (std::size_t i = 0; i < clip.size() && !out.empty(); ++i) {
    const Eigen::Vector2d a = clip[i];
    const Eigen::Vector2d b = clip[(i + 1) % clip.size()];
    auto side = [&](const Eigen::Vector2d& p) { return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x()); };
    std::vector<Eigen::Vector2d> in = std::move(out);
    out.clear();
    for (std::size_t k = 0; k < in.size(); ++k) {
      const Eigen::Vector2d& p = in[k];
      const Eigen::Vector2d& q = in[(k + 1) % in.size()];
      const double sp = side(p), sq = side(q);
      if (sp >= 0) out.push_back(p);
      if ((sp >= 0) != (sq >= 0)) out.push_back(p + (q - p) * (sp / (sp - sq)));
    }
  }
  return out;
}

namespace {

double mean_height_near(const DemGrid& dem, double x, double y, double radius) {
  const std::size_t stride = std::max<std::size_t>(1, std::max(dem.width(), dem.height()) / 256);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < dem.height(); r += stride) {
    for (std::size_t c = 0; c < dem.width(); c += stride) {
      if (dem.is_nodata(r, c)) continue;
      if (std::hypot(dem.cell_x(c) - x, dem.cell_y(r) - y) > radius) continue;
      sum += dem.at(r, c);
      ++n;
    }
  }
  if (n == 0) throw Error(Errc::footprint_too_small, "no terrain under the look-at point");
  return sum / static_cast<double>(n);
}

void require_inside(const DemGrid& dem, const std::vector<Eigen::Vector2d>& poly) {
  for (const auto& p : poly) {
    if (!dem.contains(p.x(), p.y())) throw Error(Errc::footprint_too_small, "view frustum leaves the DEM footprint");
  }
}

}  // namespace

SampledPair build_pair(const TrajectorySpec& spec, const DemGrid& dem, const SamplerOptions& opts) {
  const double a = spec.altitude_m;
  const double tilt = spec.tilt_deg * kDegToRad;
  const double heading = spec.heading_deg * kDegToRad;
  const Eigen::Vector3d baseline_dir(std::sin(heading), std::cos(heading), 0.0);
  const double view_az = heading + 0.5 * std::numbers::pi;
  const Eigen::Vector3d view_dir(std::sin(view_az), std::cos(view_az), 0.0);

  const double cx = 0.5 * (dem.min_x() + dem.max_x());
  const double cy = 0.5 * (dem.min_y() + dem.max_y());
  const double z_ref = mean_height_near(dem, cx, cy, a * (std::tan(tilt) + 0.5));
  const Eigen::Vector3d target(cx, cy, z_ref);
  const Eigen::Vector3d mid = target - a * std::tan(tilt) * view_dir;
  const double half_b = 0.5 * spec.baseline_frac * a;

  Eigen::Vector3d eye_a = mid - half_b * baseline_dir;
  Eigen::Vector3d eye_b = mid + half_b * baseline_dir;
  eye_a.z() = z_ref + a;
  eye_b.z() = z_ref + a * (1.0 + spec.altitude_delta_frac);

  Pose pose_a, pose_b;
  const bool vertical = spec.kind == TrajectoryKind::nadir || spec.baseline_frac > 1.0;
  if (vertical) {
    const Eigen::Vector3d down(0.0, 0.0, -1.0);
    pose_a = look_at(eye_a, eye_a + down, spec.heading_deg);
    pose_b = look_at(eye_b, eye_b + down, spec.heading_deg);
  } else {
    pose_a = look_at(eye_a, target, spec.heading_deg);
    pose_b = look_at(eye_b, target, spec.heading_deg);
  }
  if (spec.roll_deg != 0.0) pose_b = with_roll(pose_b, spec.roll_deg);

  SampledPair out;
  out.spec = spec;
  out.reference_height = z_ref;
  out.rig.intrinsics = opts.intrinsics;
  out.rig.pose_a = pose_a;
  out.rig.pose_b = pose_b;
  out.rig.psf_sigma = opts.psf_sigma;
  out.rig.rays_per_pixel = opts.psf_sigma == 0.0 ? 1 : opts.rays_per_pixel;
  out.rig.validate();

  const auto fa = ground_footprint(opts.intrinsics, pose_a, z_ref);
  const auto fb = ground_footprint(opts.intrinsics, pose_b, z_ref);
  require_inside(dem, fa);
  require_inside(dem, fb);
  const double shared = std::abs(polygon_area(clip_convex(fa, fb)));
  out.overlap_a = shared / std::abs(polygon_area(fa));
  out.overlap_b = shared / std::abs(polygon_area(fb));
  return out;
}

namespace {

bool clears_terrain(const DemGrid& dem, const Pose& pose) {
  const Eigen::Vector3d& c = pose.translation();
  if (!dem.contains(c.x(), c.y())) return c.z() > dem.max_elevation();
  try {
    return c.z() > sample_height(dem, c.x(), c.y());
  } catch (const Error&) {
    return c.z() > dem.max_elevation();
  }
}

}  // namespace

SampledPair sample_pair(TrajectoryKind kind, std::uint64_t seed, std::size_t band_index, const DemGrid& dem,
                        const SamplerOptions& opts) {
  if (opts.stress == StressCase::disjoint && !opts.allow_disjoint)
    throw Error(Errc::usage, "the disjoint stress case requires allow_disjoint");
  for (int attempt = 0; attempt < opts.max_attempts; ++attempt) {
    const TrajectorySpec spec = sample_spec(kind, seed, band_index, opts, attempt);
    SampledPair pair = build_pair(spec, dem, opts);
    if (!clears_terrain(dem, pair.rig.pose_a) || !clears_terrain(dem, pair.rig.pose_b)) continue;
    if (!opts.allow_disjoint && (pair.overlap_a < opts.min_overlap || pair.overlap_b < opts.min_overlap)) continue;
    return pair;
  }
  throw Error(Errc::footprint_too_small, "no admissible camera pair after " + std::to_string(opts.max_attempts) + " attempts");
}

}  // namespace lunarforge
