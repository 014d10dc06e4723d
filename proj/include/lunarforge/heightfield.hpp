#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "lunarforge/camera.hpp"
#include "lunarforge/terrain.hpp"

namespace lunarforge {

struct Hit {
  Eigen::Vector3d point;
  double depth = 0.0;  // distance from the ray origin
};

/// Ray queries against the bilinear surface spanned by a DEM's cell centers.
///
/// Rays are clipped to the footprint and to the terrain's height range, then
/// walked patch by patch (a patch is the quad between four neighboring cell
/// centers) with a 2D DDA over the ground projection. Patches whose corner
/// maximum lies below the ray segment are skipped. Along one patch the height
/// difference ray_z - terrain_z is a quadratic in the ray parameter, so
/// checking both ends and the interior extremum brackets every crossing; the
/// first bracket is refined by bisection and a closing secant step. Patches
/// touching nodata are treated as empty. Holds a reference to the DEM, which must outlive the tracer.
class HeightfieldTracer {
 public:
  explicit HeightfieldTracer(const DemGrid& dem);

  const DemGrid& dem() const noexcept { return dem_; }

  std::optional<Hit> intersect(const Ray& ray) const;
  // True if the ray meets the terrain anywhere before leaving the footprint.
  bool occluded(const Ray& ray) const;

  // Depth tolerance of the bisection refinement, in meters.
  double depth_tolerance() const noexcept { return tolerance_; }

 private:
  template <bool kRefine>
  std::optional<Hit> trace(const Ray& ray) const;

  const DemGrid& dem_;
  std::vector<double> patch_max_;  // NaN when any corner is nodata
  double z_lo_;
  double z_hi_;
  double tolerance_;
};

/// First intersection of `ray` with the DEM surface, or nullopt on a miss.
std::optional<Hit> ray_intersect_dem(const HeightfieldTracer& tracer, const Ray& ray);
std::optional<Hit> ray_intersect_dem(const DemGrid& dem, const Ray& ray);

}  // namespace lunarforge
