#pragma once

// Independent reference computations for the tests. Deliberately naive:
// fixed-step marching, exhaustive search, textbook formulas.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "lunarforge/camera.hpp"
#include "lunarforge/terrain.hpp"

namespace oracle {

using lunarforge::DemGrid;

inline DemGrid make_dem(std::size_t w, std::size_t h, double cell, double (*f)(double, double)) {
  const double ox = -0.5 * cell * static_cast<double>(w - 1);
  const double oy = 0.5 * cell * static_cast<double>(h - 1);
  lunarforge::RasterD z(w, h);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) z(r, c) = f(ox + static_cast<double>(c) * cell, oy - static_cast<double>(r) * cell);
  return DemGrid(w, h, cell, ox, oy, std::move(z));
}

inline DemGrid flat_dem(std::size_t n, double cell, double height) {
  const double ox = -0.5 * cell * static_cast<double>(n - 1);
  return DemGrid(n, n, cell, ox, -ox, lunarforge::RasterD(n, n, height));
}

// Height of the bilinear surface, computed from scratch.
inline double height_at(const DemGrid& dem, double x, double y) {
  const double fx = (x - dem.origin_x()) / dem.cell_size();
  const double fy = (dem.origin_y() - y) / dem.cell_size();
  std::size_t c = static_cast<std::size_t>(std::floor(fx));
  std::size_t r = static_cast<std::size_t>(std::floor(fy));
  c = std::min(c, dem.width() - 2);
  r = std::min(r, dem.height() - 2);
  const double tx = fx - static_cast<double>(c), ty = fy - static_cast<double>(r);
  return (1 - tx) * (1 - ty) * dem.at(r, c) + tx * (1 - ty) * dem.at(r, c + 1) + (1 - tx) * ty * dem.at(r + 1, c) +
         tx * ty * dem.at(r + 1, c + 1);
}

// Parameter interval of the ray inside the footprint box, if any.
inline std::optional<std::pair<double, double>> footprint_span(const DemGrid& dem, const Eigen::Vector3d& o,
                                                              const Eigen::Vector3d& d) {
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  const double lo[2] = {dem.min_x(), dem.min_y()}, hi[2] = {dem.max_x(), dem.max_y()};
  for (int a = 0; a < 2; ++a) {
    if (std::abs(d(a)) < 1e-300) {
      if (o(a) < lo[a] || o(a) > hi[a]) return std::nullopt;
      continue;
    }
    double ta = (lo[a] - o(a)) / d(a), tb = (hi[a] - o(a)) / d(a);
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (!(t0 <= t1) || !std::isfinite(t1)) return std::nullopt;
  return std::make_pair(t0, t1);
}

/// Fixed-step march (step = cell/100) along the ray inside the footprint; the
/// first sign change of ray_z - terrain_z is refined by bisection.
inline std::optional<double> march(const DemGrid& dem, const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                                   double step_frac = 0.01) {
  const auto span = footprint_span(dem, o, d);
  if (!span) return std::nullopt;
  const double step = dem.cell_size() * step_frac;
  auto f = [&](double t) {
    const Eigen::Vector3d p = o + t * d;
    return p.z() - height_at(dem, std::clamp(p.x(), dem.min_x(), dem.max_x()), std::clamp(p.y(), dem.min_y(), dem.max_y()));
  };
  double t_prev = span->first;
  if (f(t_prev) <= 0.0) return t_prev;
  // Skip the part of the ray above the highest terrain.
  const double zmax = dem.max_elevation();
  if (d.z() < 0.0) {
    const double t_top = (zmax - o.z()) / d.z();
    if (t_top > t_prev) t_prev = std::min(t_top, span->second);
  } else if (o.z() > zmax) {
    return std::nullopt;
  }
  if (f(t_prev) <= 0.0) return t_prev;
  for (double t = t_prev + step;; t += step) {
    const double tt = std::min(t, span->second);
    if (f(tt) <= 0.0) {
      double a = t_prev, b = tt;
      for (int i = 0; i < 80; ++i) {
        const double m = 0.5 * (a + b);
        (f(m) > 0.0 ? a : b) = m;
      }
      return 0.5 * (a + b);
    }
    if (tt >= span->second) return std::nullopt;
    if (d.z() < 0.0 && o.z() + tt * d.z() < dem.min_elevation()) return std::nullopt;
    t_prev = tt;
  }
}

// True when the open segment from p to q passes below the terrain.
inline bool segment_blocked(const DemGrid& dem, const Eigen::Vector3d& p, const Eigen::Vector3d& q, double skip) {
  const Eigen::Vector3d d = q - p;
  const double len = d.norm();
  const double step = dem.cell_size() * 0.05;
  for (double s = skip; s < len; s += step) {
    const Eigen::Vector3d x = p + (s / len) * d;
    if (!dem.contains(x.x(), x.y())) return false;
    if (x.z() < height_at(dem, x.x(), x.y())) return true;
  }
  return false;
}

inline double quaternion_angle_deg(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  const Eigen::Quaterniond qa(a), qb(b);
  return qa.angularDistance(qb) * 180.0 / M_PI;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
    saa += a[i] * a[i];
    sbb += b[i] * b[i];
    sab += a[i] * b[i];
  }
  return (n * sab - sa * sb) / std::sqrt((n * saa - sa * sa) * (n * sbb - sb * sb));
}

inline Eigen::Matrix3d random_rotation(std::uint64_t seed) {
  std::srand(static_cast<unsigned>(seed));
  Eigen::Quaterniond q(Eigen::Vector4d::Random().normalized());
  return q.toRotationMatrix();
}

}  // namespace oracle
