#include "lunarforge/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "lunarforge/error.hpp"
#include "lunarforge/parallel.hpp"
#include "lunarforge/rng.hpp"

namespace lunarforge {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double clamped_height(const DemGrid& dem, double x, double y) {
  x = std::clamp(x, dem.min_x(), dem.max_x());
  y = std::clamp(y, dem.min_y(), dem.max_y());
  return sample_height(dem, x, y);
}

// Central differences like surface_normal, shortened at the footprint edge.
Eigen::Vector3d render_normal(const DemGrid& dem, double x, double y) {
  const double h = dem.cell_size();
  const double x0 = std::max(x - h, dem.min_x()), x1 = std::min(x + h, dem.max_x());
  const double y0 = std::max(y - h, dem.min_y()), y1 = std::min(y + h, dem.max_y());
  try {
    const double gx = (clamped_height(dem, x1, y) - clamped_height(dem, x0, y)) / (x1 - x0);
    const double gy = (clamped_height(dem, x, y1) - clamped_height(dem, x, y0)) / (y1 - y0);
    return Eigen::Vector3d(-gx, -gy, 1.0).normalized();
  } catch (const Error&) {
    return Eigen::Vector3d::UnitZ();
  }
}

void check_camera_above(const DemGrid& dem, const Pose& pose) {
  const Eigen::Vector3d& c = pose.translation();
  if (!dem.contains(c.x(), c.y())) return;
  double ground;
  try {
    ground = sample_height(dem, c.x(), c.y());
  } catch (const Error&) {
    return;
  }
  if (!(c.z() > ground)) throw Error(Errc::camera_below_terrain, "camera center is at or below the terrain");
}

}  // namespace

double exposure_gain(const RasterD& radiance) {
  std::vector<double> v;
  v.reserve(radiance.size());
  for (double r : radiance.values())
    if (r > 0.0) v.push_back(r);
  if (v.empty()) return 1.0;
  const std::size_t rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(v.size()))) - 1;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(rank), v.end());
  return 1.0 / v[rank];
}

void apply_gain(RenderProduct& product, double gain) {
  product.gain = gain;
  product.image = RasterD(product.radiance.width(), product.radiance.height());
  for (std::size_t i = 0; i < product.radiance.size(); ++i)
    product.image[i] = std::clamp(product.radiance[i] * gain, 0.0, 1.0);
}

RenderProduct render_view(const HeightfieldTracer& tracer, const Intrinsics& intr, const Pose& pose,
                          double psf_sigma, std::size_t rays_per_pixel, const RenderSettings& settings,
                          std::uint32_t view_id) {
  CameraRig probe{intr, pose, pose, psf_sigma, rays_per_pixel};
  probe.validate();
  settings.sun.validate();
  const DemGrid& dem = tracer.dem();
  check_camera_above(dem, pose);

  const std::size_t w = intr.width, h = intr.height;
  RenderProduct out;
  out.radiance = RasterD(w, h, 0.0);
  out.depth = RasterD(w, h, kNaN);
  out.valid_mask = Mask(w, h, 0);
  out.intrinsics = intr;
  out.pose = pose;
  out.sun = settings.sun;

  const std::uint64_t view_key = hash_combine(settings.seed, view_id);
  const std::size_t rays = psf_sigma == 0.0 ? 1 : rays_per_pixel;

  auto shade_ray = [&](const Ray& ray) -> double {
    const auto hit = tracer.intersect(ray);
    if (!hit) return 0.0;
    const Eigen::Vector3d n = render_normal(dem, hit->point.x(), hit->point.y());
    return shade_point(tracer, hit->point, n, settings.sun, settings.hapke, -ray.direction);
  };

  const std::size_t workers = settings.workers == 0 ? default_worker_count() : settings.workers;
  parallel_for(h, workers, [&](std::size_t row) {
    for (std::size_t col = 0; col < w; ++col) {
      const double u = static_cast<double>(col), v = static_cast<double>(row);
      const std::size_t pix = row * w + col;
      const Ray central = pixel_ray(intr, pose, u, v);
      if (const auto hit = tracer.intersect(central)) {
        out.depth[pix] = hit->depth;
        out.valid_mask[pix] = 1;
      }
      double sum = 0.0;
      if (rays == 1) {
        sum = shade_ray(central);
      } else {
        Rng rng(hash_combine(view_key, pix));
        for (std::size_t k = 0; k < rays; ++k) {
          // Radially stratified Gaussian offsets.
          const double u1 = (static_cast<double>(k) + rng.uniform()) / static_cast<double>(rays);
          const double radius = psf_sigma * std::sqrt(-2.0 * std::log(1.0 - u1));
          const double phi = 2.0 * std::numbers::pi * rng.uniform();
          sum += shade_ray(pixel_ray(intr, pose, u, v, radius * std::cos(phi), radius * std::sin(phi)));
        }
      }
      out.radiance[pix] = sum / static_cast<double>(rays);
    }
  });
  apply_gain(out, exposure_gain(out.radiance));
  return out;
}

RenderProduct render_view(const DemGrid& dem, const Intrinsics& intr, const Pose& pose, double psf_sigma,
                          std::size_t rays_per_pixel, const RenderSettings& settings, std::uint32_t view_id) {
  const HeightfieldTracer tracer(dem);
  return render_view(tracer, intr, pose, psf_sigma, rays_per_pixel, settings, view_id);
}

RenderedPair render_pair(const DemGrid& dem, const CameraRig& rig, const RenderSettings& settings) {
  rig.validate();
  const HeightfieldTracer tracer(dem);
  RenderedPair out{render_view(tracer, rig.intrinsics, rig.pose_a, rig.psf_sigma, rig.rays_per_pixel, settings, 0),
                   render_view(tracer, rig.intrinsics, rig.pose_b, rig.psf_sigma, rig.rays_per_pixel, settings, 1)};
  const double gain = out.a.gain;
  apply_gain(out.b, gain);
  return out;
}

const char* to_string(PointFrame frame) { return frame == PointFrame::view1 ? "view1" : "world"; }

PointMap depth_to_pointmap(const RasterD& depth, const Intrinsics& intr, const Pose& pose, PointFrame frame,
                           const Pose& reference_pose) {
  if (depth.width() != intr.width || depth.height() != intr.height)
    throw Error(Errc::dimension_mismatch, "depth raster does not match the intrinsics");
  PointMap pm;
  pm.width = depth.width();
  pm.height = depth.height();
  pm.frame = frame;
  pm.reference = frame == PointFrame::view1 ? reference_pose : Pose::identity();
  pm.points.assign(depth.size(), Eigen::Vector3d::Constant(kNaN));
  pm.valid_mask = Mask(pm.width, pm.height, 0);
  for (std::size_t r = 0; r < pm.height; ++r) {
    for (std::size_t c = 0; c < pm.width; ++c) {
      const double d = depth(r, c);
      if (!std::isfinite(d)) continue;
      const Ray ray = pixel_ray(intr, pose, static_cast<double>(c), static_cast<double>(r));
      Eigen::Vector3d p = ray.origin + d * ray.direction;
      if (frame == PointFrame::view1) p = reference_pose.to_camera(p);
      pm.points[r * pm.width + c] = p;
      pm.valid_mask(r, c) = 1;
    }
  }
  return pm;
}

PointMap depth_to_pointmap(const RenderProduct& product, PointFrame frame, const Pose& reference_pose) {
  return depth_to_pointmap(product.depth, product.intrinsics, product.pose, frame, reference_pose);
}

double sample_depth(const RasterD& depth, double u, double v) {
  // Reprojection round-off must not pull in a neighbor of an exact pixel center.
  constexpr double kSnap = 1e-9;
  if (std::abs(u - std::round(u)) < kSnap) u = std::round(u);
  if (std::abs(v - std::round(v)) < kSnap) v = std::round(v);
  if (!(u >= 0.0 && v >= 0.0)) return kNaN;
  const double wmax = static_cast<double>(depth.width() - 1), hmax = static_cast<double>(depth.height() - 1);
  if (u > wmax || v > hmax) return kNaN;
  std::size_t c0 = static_cast<std::size_t>(u), r0 = static_cast<std::size_t>(v);
  if (c0 + 1 >= depth.width()) c0 = depth.width() - 2;
  if (r0 + 1 >= depth.height()) r0 = depth.height() - 2;
  const double fx = u - static_cast<double>(c0), fy = v - static_cast<double>(r0);
  const double w[4] = {(1.0 - fy) * (1.0 - fx), (1.0 - fy) * fx, fy * (1.0 - fx), fy * fx};
  const double z[4] = {depth(r0, c0), depth(r0, c0 + 1), depth(r0 + 1, c0), depth(r0 + 1, c0 + 1)};
  // Samples with zero weight may be invalid (exact pixel centers next to a miss).
  double acc = 0.0;
  for (int k = 0; k < 4; ++k) {
    if (w[k] == 0.0) continue;
    if (!std::isfinite(z[k])) return kNaN;
    acc += w[k] * z[k];
  }
  return acc;
}

CorrespondenceSet gt_correspondences(const RenderProduct& a, const RenderProduct& b, std::size_t stride,
                                     double tolerance_m) {
  if (stride == 0) throw Error(Errc::invalid_argument, "stride must be positive");
  CorrespondenceSet out;
  const Intrinsics& ib = b.intrinsics;
  for (std::size_t r = 0; r < a.depth.height(); r += stride) {
    for (std::size_t c = 0; c < a.depth.width(); c += stride) {
      const double d = a.depth(r, c);
      if (!std::isfinite(d)) continue;
      const Ray ray = pixel_ray(a.intrinsics, a.pose, static_cast<double>(c), static_cast<double>(r));
      const Eigen::Vector3d x = ray.origin + d * ray.direction;
      const Eigen::Vector3d xb = b.pose.to_camera(x);
      if (!(xb.z() < 0.0)) continue;
      const Projection p = project(ib, b.pose, x);
      const double db = sample_depth(b.depth, p.u, p.v);
      if (!std::isfinite(db)) continue;
      const double tol = tolerance_m > 0.0 ? tolerance_m : gsd(p.depth, ib.fov_deg, ib.width);
      if (std::abs(db - p.depth) > tol) continue;
      out.pairs.push_back({static_cast<double>(c), static_cast<double>(r), p.u, p.v});
    }
  }
  return out;
}

}  // namespace lunarforge
