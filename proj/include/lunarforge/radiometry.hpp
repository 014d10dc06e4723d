#pragma once

#include <Eigen/Core>

#include "json.hpp"
#include "lunarforge/heightfield.hpp"
#include "lunarforge/terrain.hpp"

namespace lunarforge {

/// Isotropic multiple-scattering Hapke parameters (no macroscopic roughness,
/// single-lobe Henyey-Greenstein phase). Albedo is constant over the scene.
class HapkeParams {
 public:
  // Lunar-regolith magnitudes; not fitted to any measurement.
  HapkeParams() : HapkeParams(0.25, 1.0, 0.05, -0.25) {}
  HapkeParams(double w, double b0, double h_opp, double xi);

  double w() const noexcept { return w_; }
  double b0() const noexcept { return b0_; }
  double h_opp() const noexcept { return h_opp_; }
  double xi() const noexcept { return xi_; }

  bool operator==(const HapkeParams&) const = default;

 private:
  double w_, b0_, h_opp_, xi_;
};

struct SunConfig {
  double azimuth = 0.0;    // degrees clockwise from +y (north), [0, 360)
  double elevation = 45.0; // degrees above the horizon, (0, 90]
  double irradiance = 1.0;

  void validate() const;
  bool operator==(const SunConfig&) const = default;
};

// Chandrasekhar H-function, rational approximation.
double chandrasekhar_h(double x, double w);
double henyey_greenstein(double g, double xi);
double opposition_surge(double g, double b0, double h_opp);

/// Bidirectional reflectance r(mu0, mu, g) = w/(4 pi) * mu0/(mu0+mu) *
/// [(1 + B(g)) P(g) + H(mu0) H(mu) - 1]; radiance is irradiance * r.
double hapke_reflectance(double mu0, double mu, double g, const HapkeParams& params);

/// BRDF in 1/sr: r / mu0. Symmetric in (mu0, mu) bit for bit.
double hapke_brdf(double mu0, double mu, double g, const HapkeParams& params);

/// (cos e sin a, cos e cos a, sin e) for azimuth a and elevation e.
Eigen::Vector3d sun_direction(const SunConfig& cfg);

enum class Visibility { lit, shadowed };

// Default bias along the sun ray: half a DEM cell.
double default_shadow_bias(const DemGrid& dem);

Visibility shadow_test(const HeightfieldTracer& tracer, const Eigen::Vector3d& point,
                       const Eigen::Vector3d& sun_dir, double bias);
Visibility shadow_test(const DemGrid& dem, const Eigen::Vector3d& point, const Eigen::Vector3d& sun_dir,
                       double bias);

/// Radiance leaving `point` toward the camera. Zero when shadowed or when
/// either the sun or the viewer is below the facet's horizon.
double shade_point(const HeightfieldTracer& tracer, const Eigen::Vector3d& point,
                   const Eigen::Vector3d& normal, const SunConfig& sun, const HapkeParams& params,
                   const Eigen::Vector3d& view_dir);
double shade_point(const DemGrid& dem, const Eigen::Vector3d& point, const Eigen::Vector3d& normal,
                   const SunConfig& sun, const HapkeParams& params, const Eigen::Vector3d& view_dir);

void to_json(nlohmann::json& j, const HapkeParams& p);
void from_json(const nlohmann::json& j, HapkeParams& p);
void to_json(nlohmann::json& j, const SunConfig& s);
void from_json(const nlohmann::json& j, SunConfig& s);

}  // namespace lunarforge
