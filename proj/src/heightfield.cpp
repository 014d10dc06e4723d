#include "lunarforge/heightfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lunarforge {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

HeightfieldTracer::HeightfieldTracer(const DemGrid& dem)
    : dem_(dem),
      patch_max_((dem.width() - 1) * (dem.height() - 1)),
      z_lo_(dem.min_elevation()),
      z_hi_(dem.max_elevation()),
      tolerance_(1e-6 * dem.cell_size()) {
  const std::size_t pw = dem.width() - 1;
  for (std::size_t r = 0; r + 1 < dem.height(); ++r) {
    for (std::size_t c = 0; c < pw; ++c) {
      const double a = dem.at(r, c), b = dem.at(r, c + 1), d = dem.at(r + 1, c), e = dem.at(r + 1, c + 1);
      patch_max_[r * pw + c] = std::max({a, b, d, e});
      if (std::isnan(a) || std::isnan(b) || std::isnan(d) || std::isnan(e))
        patch_max_[r * pw + c] = std::numeric_limits<double>::quiet_NaN();
    }
  }
}

std::optional<Hit> HeightfieldTracer::intersect(const Ray& ray) const { return trace<true>(ray); }

bool HeightfieldTracer::occluded(const Ray& ray) const { return trace<false>(ray).has_value(); }

template <bool kRefine>
std::optional<Hit> HeightfieldTracer::trace(const Ray& ray) const {
  if (std::isnan(z_lo_)) return std::nullopt;
  const Eigen::Vector3d& o = ray.origin;
  const Eigen::Vector3d& d = ray.direction;
  const double h = dem_.cell_size();

  // Parameter interval inside the footprint box and the terrain height slab.
  double s_lo = 0.0;
  double s_hi = kInf;
  auto clip = [&](double origin, double dir, double lo, double hi) {
    if (dir == 0.0) {
      if (origin < lo || origin > hi) s_hi = -1.0;
      return;
    }
    double a = (lo - origin) / dir;
    double b = (hi - origin) / dir;
    if (a > b) std::swap(a, b);
    s_lo = std::max(s_lo, a);
    s_hi = std::min(s_hi, b);
  };
  const double slack = 1e-9 * h;
  clip(o.x(), d.x(), dem_.min_x(), dem_.max_x());
  clip(o.y(), d.y(), dem_.min_y(), dem_.max_y());
  clip(o.z(), d.z(), z_lo_ - slack, z_hi_ + slack);
  if (!(s_lo <= s_hi)) return std::nullopt;

  const std::size_t pw = dem_.width() - 1;
  const std::size_t ph = dem_.height() - 1;
  const double ox = dem_.origin_x();
  const double oy = dem_.origin_y();
  // Grid coordinates: column grows with x, row grows with -y.
  const double bx = d.x() / h;
  const double by = -d.y() / h;
  auto grid_col = [&](double s) { return (o.x() + s * d.x() - ox) / h; };
  auto grid_row = [&](double s) { return (oy - (o.y() + s * d.y())) / h; };

  auto clamp_index = [](double g, std::size_t n) {
    if (!(g > 0.0)) return std::size_t{0};
    const auto i = static_cast<std::size_t>(g);
    return std::min(i, n - 1);
  };
  std::size_t pc = clamp_index(grid_col(s_lo), pw);
  std::size_t pr = clamp_index(grid_row(s_lo), ph);

  const int step_c = bx > 0 ? 1 : (bx < 0 ? -1 : 0);
  const int step_r = by > 0 ? 1 : (by < 0 ? -1 : 0);
  // Ray parameter at which the walk crosses into the next patch column / row.
  auto next_boundary = [&](std::size_t idx, int step, double origin_g, double rate) {
    if (step == 0) return kInf;
    const double boundary = static_cast<double>(idx) + (step > 0 ? 1.0 : 0.0);
    return (boundary - origin_g) / rate;
  };
  const double g0c = (o.x() - ox) / h;
  const double g0r = (oy - o.y()) / h;
  double s_next_c = next_boundary(pc, step_c, g0c, bx);
  double s_next_r = next_boundary(pr, step_r, g0r, by);
  const double ds_c = step_c ? std::abs(1.0 / bx) : kInf;
  const double ds_r = step_r ? std::abs(1.0 / by) : kInf;

  double sa = s_lo;
  while (sa <= s_hi) {
    const double sb = std::max(sa, std::min({s_next_c, s_next_r, s_hi}));
    const double pmax = patch_max_[pr * pw + pc];
    const double za = o.z() + sa * d.z();
    const double zb = o.z() + sb * d.z();
    if (!std::isnan(pmax) && std::min(za, zb) <= pmax) {
      const double z00 = dem_.at(pr, pc), z01 = dem_.at(pr, pc + 1);
      const double z10 = dem_.at(pr + 1, pc), z11 = dem_.at(pr + 1, pc + 1);
      const double dzx = z01 - z00, dzy = z10 - z00, dxy = z00 - z01 - z10 + z11;
      // Local frame anchored at the segment start for precision.
      const Eigen::Vector3d p0 = o + sa * d;
      const double ax = (p0.x() - ox) / h - static_cast<double>(pc);
      const double ay = (oy - p0.y()) / h - static_cast<double>(pr);
      auto f = [&](double t) {
        const double fx = ax + t * bx;
        const double fy = ay + t * by;
        return (p0.z() + t * d.z()) - (z00 + dzx * fx + dzy * fy + dxy * fx * fy);
      };
      const double len = sb - sa;
      double t_lo = 0.0;
      double t_hi = -1.0;
      const double f0 = f(0.0);
      if (f0 <= 0.0) {
        t_hi = 0.0;
      } else {
        const double a2 = -dxy * bx * by;
        const double a1 = d.z() - (dzx * bx + dzy * by + dxy * (ax * by + ay * bx));
        double t_mid = -1.0;
        if (a2 != 0.0) t_mid = -a1 / (2.0 * a2);
        if (t_mid > 0.0 && t_mid < len && f(t_mid) <= 0.0) {
          t_hi = t_mid;
        } else if (f(len) <= 0.0) {
          t_hi = len;
        }
      }
      if (t_hi >= 0.0) {
        if constexpr (kRefine) {
          while (t_hi - t_lo > tolerance_) {
            const double t = 0.5 * (t_lo + t_hi);
            if (f(t) > 0.0) {
              t_lo = t;
            } else {
              t_hi = t;
            }
          }
          const double f_lo = f(t_lo), f_hi = f(t_hi);
          if (f_lo > 0.0 && f_hi < 0.0) t_hi = t_lo + (t_hi - t_lo) * (f_lo / (f_lo - f_hi));
        }
        const double s = sa + t_hi;
        return Hit{o + s * d, s};
      }
    }
    if (sb >= s_hi) break;
    if (s_next_c <= s_next_r) {
      if ((step_c < 0 && pc == 0) || (step_c > 0 && pc + 1 >= pw)) break;
      pc = static_cast<std::size_t>(static_cast<long>(pc) + step_c);
      s_next_c += ds_c;
    } else {
      if ((step_r < 0 && pr == 0) || (step_r > 0 && pr + 1 >= ph)) break;
      pr = static_cast<std::size_t>(static_cast<long>(pr) + step_r);
      s_next_r += ds_r;
    }
    sa = sb;
  }
  return std::nullopt;
}

std::optional<Hit> ray_intersect_dem(const HeightfieldTracer& tracer, const Ray& ray) {
  return tracer.intersect(ray);
}

std::optional<Hit> ray_intersect_dem(const DemGrid& dem, const Ray& ray) {
  return HeightfieldTracer(dem).intersect(ray);
}

}  // namespace lunarforge
