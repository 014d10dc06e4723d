#include "lunarforge/radiometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lunarforge/error.hpp"

namespace lunarforge {

namespace {
constexpr double kDegToRad = std::numbers::pi / 180.0;
}

HapkeParams::HapkeParams(double w, double b0, double h_opp, double xi) : w_(w), b0_(b0), h_opp_(h_opp), xi_(xi) {
  if (!(w > 0.0 && w <= 1.0)) throw Error(Errc::invalid_argument, "Hapke w must lie in (0, 1]");
  if (!(b0 >= 0.0) || !std::isfinite(b0)) throw Error(Errc::invalid_argument, "Hapke B0 must be >= 0");
  if (!(h_opp > 0.0) || !std::isfinite(h_opp)) throw Error(Errc::invalid_argument, "Hapke h_opp must be > 0");
  if (!(xi > -1.0 && xi < 1.0)) throw Error(Errc::invalid_argument, "Hapke xi must lie in (-1, 1)");
}

void SunConfig::validate() const {
  if (!(azimuth >= 0.0 && azimuth < 360.0)) throw Error(Errc::invalid_argument, "sun azimuth must lie in [0, 360)");
  if (!(elevation > 0.0 && elevation <= 90.0)) throw Error(Errc::invalid_argument, "sun elevation must lie in (0, 90]");
  if (!(irradiance >= 0.0) || !std::isfinite(irradiance)) throw Error(Errc::invalid_argument, "irradiance must be >= 0");
}

double chandrasekhar_h(double x, double w) { return (1.0 + 2.0 * x) / (1.0 + 2.0 * x * std::sqrt(1.0 - w)); }

double henyey_greenstein(double g, double xi) {
  return (1.0 - xi * xi) / std::pow(1.0 + 2.0 * xi * std::cos(g) + xi * xi, 1.5);
}

double opposition_surge(double g, double b0, double h_opp) { return b0 / (1.0 + std::tan(0.5 * g) / h_opp); }

double hapke_reflectance(double mu0, double mu, double g, const HapkeParams& p) {
  return mu0 * hapke_brdf(mu0, mu, g, p);
}

double hapke_brdf(double mu0, double mu, double g, const HapkeParams& p) {
  if (!(mu0 > 0.0 && mu0 <= 1.0) || !(mu > 0.0 && mu <= 1.0))
    throw Error(Errc::invalid_argument, "hapke_brdf needs mu0, mu in (0, 1]");
  if (!(g >= 0.0 && g <= std::numbers::pi)) throw Error(Errc::invalid_argument, "phase angle must lie in [0, pi]");
  const double b = opposition_surge(g, p.b0(), p.h_opp());
  const double phase = henyey_greenstein(g, p.xi());
  const double multiple = chandrasekhar_h(mu0, p.w()) * chandrasekhar_h(mu, p.w()) - 1.0;
  return p.w() / (4.0 * std::numbers::pi) / (mu0 + mu) * ((1.0 + b) * phase + multiple);
}

Eigen::Vector3d sun_direction(const SunConfig& cfg) {
  const double a = cfg.azimuth * kDegToRad;
  const double e = cfg.elevation * kDegToRad;
  return Eigen::Vector3d(std::cos(e) * std::sin(a), std::cos(e) * std::cos(a), std::sin(e));
}

double default_shadow_bias(const DemGrid& dem) { return 0.5 * dem.cell_size(); }

Visibility shadow_test(const HeightfieldTracer& tracer, const Eigen::Vector3d& point, const Eigen::Vector3d& sun_dir,
                       double bias) {
  const Ray ray{point + bias * sun_dir, sun_dir};
  return tracer.occluded(ray) ? Visibility::shadowed : Visibility::lit;
}

Visibility shadow_test(const DemGrid& dem, const Eigen::Vector3d& point, const Eigen::Vector3d& sun_dir, double bias) {
  return shadow_test(HeightfieldTracer(dem), point, sun_dir, bias);
}

namespace {

double reflected(const Eigen::Vector3d& normal, const SunConfig& sun, const HapkeParams& params,
                 const Eigen::Vector3d& sun_dir, const Eigen::Vector3d& view_dir) {
  const double mu0 = std::min(1.0, normal.dot(sun_dir));
  const double mu = std::min(1.0, normal.dot(view_dir));
  if (!(mu0 > 0.0) || !(mu > 0.0)) return 0.0;
  const double g = std::acos(std::clamp(sun_dir.dot(view_dir), -1.0, 1.0));
  return sun.irradiance * mu0 * hapke_brdf(mu0, mu, g, params);
}

}  // namespace

double shade_point(const HeightfieldTracer& tracer, const Eigen::Vector3d& point, const Eigen::Vector3d& normal,
                   const SunConfig& sun, const HapkeParams& params, const Eigen::Vector3d& view_dir) {
  const Eigen::Vector3d s = sun_direction(sun);
  if (!(normal.dot(s) > 0.0) || !(normal.dot(view_dir) > 0.0)) return 0.0;
  if (shadow_test(tracer, point, s, default_shadow_bias(tracer.dem())) == Visibility::shadowed) return 0.0;
  return std::max(0.0, reflected(normal, sun, params, s, view_dir));
}

double shade_point(const DemGrid& dem, const Eigen::Vector3d& point, const Eigen::Vector3d& normal,
                   const SunConfig& sun, const HapkeParams& params, const Eigen::Vector3d& view_dir) {
  return shade_point(HeightfieldTracer(dem), point, normal, sun, params, view_dir);
}

void to_json(nlohmann::json& j, const HapkeParams& p) {
  j = {{"w", p.w()}, {"B0", p.b0()}, {"h_opp", p.h_opp()}, {"xi", p.xi()}};
}

void from_json(const nlohmann::json& j, HapkeParams& p) {
  p = HapkeParams(j.at("w").get<double>(), j.at("B0").get<double>(), j.at("h_opp").get<double>(),
                  j.at("xi").get<double>());
}

void to_json(nlohmann::json& j, const SunConfig& s) {
  j = {{"azimuth", s.azimuth}, {"elevation", s.elevation}, {"irradiance", s.irradiance}};
}

void from_json(const nlohmann::json& j, SunConfig& s) {
  s = SunConfig{j.at("azimuth").get<double>(), j.at("elevation").get<double>(), j.at("irradiance").get<double>()};
  s.validate();
}

}  // namespace lunarforge
