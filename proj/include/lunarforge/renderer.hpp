#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "lunarforge/camera.hpp"
#include "lunarforge/heightfield.hpp"
#include "lunarforge/radiometry.hpp"
#include "lunarforge/raster.hpp"
#include "lunarforge/terrain.hpp"

namespace lunarforge {

struct RenderSettings {
  SunConfig sun;
  HapkeParams hapke;
  std::uint64_t seed = 0;
  std::size_t workers = 0;  // 0: default_worker_count()
};

/// One rendered view. `radiance` is unnormalized; `image` is the [0,1] image
/// after the pair gain has been applied (render_view leaves gain = 1 / p99 of
/// its own radiance).
struct RenderProduct {
  RasterD image;
  RasterD radiance;
  RasterD depth;  // Euclidean ray depth, NaN on a miss
  Mask valid_mask;
  Intrinsics intrinsics;
  Pose pose;
  SunConfig sun;
  double gain = 1.0;
};

RenderProduct render_view(const HeightfieldTracer& tracer, const Intrinsics& intr, const Pose& pose,
                          double psf_sigma, std::size_t rays_per_pixel, const RenderSettings& settings,
                          std::uint32_t view_id = 0);
RenderProduct render_view(const DemGrid& dem, const Intrinsics& intr, const Pose& pose, double psf_sigma,
                          std::size_t rays_per_pixel, const RenderSettings& settings, std::uint32_t view_id = 0);

struct RenderedPair {
  RenderProduct a;
  RenderProduct b;
};

/// Renders both views (view ids 0 and 1) and applies a shared gain taken from
/// view a's 99th-percentile radiance.
RenderedPair render_pair(const DemGrid& dem, const CameraRig& rig, const RenderSettings& settings);

// Gain 1 / p99 over positive radiance samples; 1 when none are positive.
double exposure_gain(const RasterD& radiance);
void apply_gain(RenderProduct& product, double gain);

enum class PointFrame { view1, world };
const char* to_string(PointFrame frame);

struct PointMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<Eigen::Vector3d> points;  // row-major; NaN where invalid
  Mask valid_mask;
  PointFrame frame = PointFrame::world;
  Pose reference;  // the view1 camera when frame == view1

  const Eigen::Vector3d& at(std::size_t row, std::size_t col) const { return points[row * width + col]; }
};

PointMap depth_to_pointmap(const RenderProduct& product, PointFrame frame, const Pose& reference_pose);
PointMap depth_to_pointmap(const RasterD& depth, const Intrinsics& intr, const Pose& pose, PointFrame frame,
                           const Pose& reference_pose);

struct Correspondence {
  double u1, v1, u2, v2;
};

enum class CorrespondenceSource { ground_truth, external };

struct CorrespondenceSet {
  std::vector<Correspondence> pairs;
  bool occlusion_filtered = true;
  CorrespondenceSource source = CorrespondenceSource::ground_truth;
};

/// Strided pixels of a reprojected into b, kept when b's interpolated ray depth
/// agrees with the point's distance to camera b within `tolerance_m`.
/// A non-positive tolerance selects 1 GSD at camera b's height above the point.
CorrespondenceSet gt_correspondences(const RenderProduct& a, const RenderProduct& b, std::size_t stride = 1,
                                     double tolerance_m = 0.0);

// Bilinear depth at a subpixel position; NaN if a sample with nonzero weight is
// invalid or the position leaves the image. Positions within 1e-9 px of a pixel
// center are snapped to it.
double sample_depth(const RasterD& depth, double u, double v);

}  // namespace lunarforge
