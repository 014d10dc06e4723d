#include "lunarforge/terrain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "lunarforge/error.hpp"
#include "lunarforge/rng.hpp"
#include "lunarforge/simd/kernels.hpp"

namespace lunarforge {

DemGrid::DemGrid(std::size_t width, std::size_t height, double cell_size, double origin_x,
                 double origin_y, RasterD elevations, std::string frame_note)
    : elevations_(std::move(elevations)),
      cell_size_(cell_size),
      origin_x_(origin_x),
      origin_y_(origin_y),
      frame_note_(std::move(frame_note)),
      min_(kNoData),
      max_(kNoData) {
  if (width < 2 || height < 2) throw Error(Errc::invalid_argument, "DEM must be at least 2x2 cells");
  if (!(cell_size > 0.0) || !std::isfinite(cell_size))
    throw Error(Errc::invalid_argument, "DEM cell_size must be positive");
  if (elevations_.width() != width || elevations_.height() != height)
    throw Error(Errc::dimension_mismatch, "elevation raster does not match declared dimensions");
  for (double z : elevations_.values()) {
    if (std::isnan(z)) continue;
    if (!std::isfinite(z)) throw Error(Errc::invalid_argument, "DEM elevations must be finite or nodata");
    if (std::isnan(min_) || z < min_) min_ = z;
    if (std::isnan(max_) || z > max_) max_ = z;
  }
}

bool DemGrid::is_nodata(std::size_t row, std::size_t col) const { return std::isnan(elevations_(row, col)); }

bool DemGrid::contains(double x, double y) const noexcept {
  const double tol = 1e-9 * cell_size_;
  return x >= min_x() - tol && x <= max_x() + tol && y >= min_y() - tol && y <= max_y() + tol;
}

std::optional<std::string> DemGrid::lunar_range_warning() const {
  if (std::isnan(min_)) return std::nullopt;
  if (min_ < kLunarMinElevation || max_ > kLunarMaxElevation) {
    std::ostringstream os;
    os << "elevations [" << min_ << ", " << max_ << "] m exceed the lunar envelope ["
       << kLunarMinElevation << ", " << kLunarMaxElevation << "] m";
    return os.str();
  }
  return std::nullopt;
}

namespace {

// Fractional lattice coordinate, snapped onto integers within rounding noise so
// cell-center queries reproduce stored values exactly.
double lattice_coord(double v) {
  const double r = std::round(v);
  return std::abs(v - r) <= 1e-9 * std::max(1.0, std::abs(v)) ? r : v;
}

struct Bracket {
  std::size_t r0, c0;
  double fy, fx;
};

Bracket bracket(const DemGrid& dem, double x, double y) {
  if (!std::isfinite(x) || !std::isfinite(y) || !dem.contains(x, y)) {
    std::ostringstream os;
    os << "query (" << x << ", " << y << ") lies outside the DEM footprint";
    throw Error(Errc::out_of_bounds, os.str());
  }
  const double gc = std::clamp(lattice_coord((x - dem.origin_x()) / dem.cell_size()), 0.0,
                               static_cast<double>(dem.width() - 1));
  const double gr = std::clamp(lattice_coord((dem.origin_y() - y) / dem.cell_size()), 0.0,
                               static_cast<double>(dem.height() - 1));
  auto c0 = static_cast<std::size_t>(std::floor(gc));
  auto r0 = static_cast<std::size_t>(std::floor(gr));
  c0 = std::min(c0, dem.width() - 2);
  r0 = std::min(r0, dem.height() - 2);
  return {r0, c0, gr - static_cast<double>(r0), gc - static_cast<double>(c0)};
}

}  // namespace

double sample_height(const DemGrid& dem, double x, double y) {
  const Bracket b = bracket(dem, x, y);
  const double w[4] = {(1.0 - b.fx) * (1.0 - b.fy), b.fx * (1.0 - b.fy), (1.0 - b.fx) * b.fy, b.fx * b.fy};
  const double z[4] = {dem.at(b.r0, b.c0), dem.at(b.r0, b.c0 + 1), dem.at(b.r0 + 1, b.c0),
                       dem.at(b.r0 + 1, b.c0 + 1)};
  double top = 0.0;
  double bottom = 0.0;
  for (int i = 0; i < 4; ++i) {
    if (w[i] != 0.0 && std::isnan(z[i])) throw Error(Errc::nodata, "bilinear neighborhood touches nodata");
  }
  // Zero-weight terms are skipped so a nodata neighbor cannot poison an exact lattice hit.
  if (w[0] != 0.0) top += w[0] * z[0];
  if (w[1] != 0.0) top += w[1] * z[1];
  if (w[2] != 0.0) bottom += w[2] * z[2];
  if (w[3] != 0.0) bottom += w[3] * z[3];
  return top + bottom;
}

Eigen::Vector3d surface_normal(const DemGrid& dem, double x, double y) {
  const double h = dem.cell_size();
  const double gx = (sample_height(dem, x + h, y) - sample_height(dem, x - h, y)) / (2.0 * h);
  const double gy = (sample_height(dem, x, y + h) - sample_height(dem, x, y - h)) / (2.0 * h);
  return Eigen::Vector3d(-gx, -gy, 1.0).normalized();
}

namespace {

void check_spacing(double spacing) {
  if (!(spacing > 0.0) || !std::isfinite(spacing))
    throw Error(Errc::invalid_argument, "raster spacing must be positive");
}

void check_raster(const RasterD& elevation) {
  if (elevation.width() < 2 || elevation.height() < 2)
    throw Error(Errc::invalid_argument, "elevation raster must be at least 2x2");
}

// Gradient in world axes (+x east = +col, +y north = -row) at any cell,
// central inside and one-sided on the borders.
void gradient_at(const RasterD& z, std::size_t r, std::size_t c, double h, double& gx, double& gy) {
  const std::size_t w = z.width();
  const std::size_t ht = z.height();
  if (c == 0) {
    gx = (z(r, 1) - z(r, 0)) / h;
  } else if (c == w - 1) {
    gx = (z(r, w - 1) - z(r, w - 2)) / h;
  } else {
    gx = (z(r, c + 1) - z(r, c - 1)) * (1.0 / (2.0 * h));
  }
  if (r == 0) {
    gy = (z(0, c) - z(1, c)) / h;
  } else if (r == ht - 1) {
    gy = (z(ht - 2, c) - z(ht - 1, c)) / h;
  } else {
    gy = (z(r - 1, c) - z(r + 1, c)) * (1.0 / (2.0 * h));
  }
}

constexpr double kRadToDeg = 180.0 / std::numbers::pi;
const double kMaxSlopeDeg = std::nextafter(90.0, 0.0);

double slope_from_tangent(double t) {
  if (std::isnan(t)) return t;
  return std::min(std::atan(t) * kRadToDeg, kMaxSlopeDeg);
}

bool is_border(std::size_t r, std::size_t c, std::size_t w, std::size_t h) {
  return r == 0 || c == 0 || r + 1 == h || c + 1 == w;
}

}  // namespace

SlopeMap slope_map(const RasterD& elevation, double spacing) {
  check_spacing(spacing);
  check_raster(elevation);
  const std::size_t w = elevation.width();
  const std::size_t h = elevation.height();
  SlopeMap out{w, h, RasterD(w, h), spacing};
  const double inv_2h = 1.0 / (2.0 * spacing);
  for (std::size_t r = 1; r + 1 < h; ++r) {
    simd::gradient_norm_row(elevation.row(r - 1), elevation.row(r), elevation.row(r + 1), w, inv_2h,
                            out.slopes.row(r));
  }
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      double& s = out.slopes(r, c);
      if (is_border(r, c, w, h)) {
        double gx, gy;
        gradient_at(elevation, r, c, spacing, gx, gy);
        s = std::sqrt(gx * gx + gy * gy);
      }
      s = std::isnan(elevation(r, c)) ? std::numeric_limits<double>::quiet_NaN() : slope_from_tangent(s);
    }
  }
  return out;
}

RasterD hillshade(const RasterD& elevation, double spacing, double sun_azimuth_deg,
                  double sun_elevation_deg) {
  check_spacing(spacing);
  check_raster(elevation);
  const double az = sun_azimuth_deg / kRadToDeg;
  const double el = sun_elevation_deg / kRadToDeg;
  const double sx = std::cos(el) * std::sin(az);
  const double sy = std::cos(el) * std::cos(az);
  const double sz = std::sin(el);
  const std::size_t w = elevation.width();
  const std::size_t h = elevation.height();
  RasterD out(w, h);
  const double inv_2h = 1.0 / (2.0 * spacing);
  for (std::size_t r = 1; r + 1 < h; ++r) {
    simd::hillshade_row(elevation.row(r - 1), elevation.row(r), elevation.row(r + 1), w, inv_2h, sx, sy,
                        sz, out.row(r));
  }
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      if (!is_border(r, c, w, h)) continue;
      double gx, gy;
      gradient_at(elevation, r, c, spacing, gx, gy);
      const double v = ((sz - gx * sx) - gy * sy) / std::sqrt((gx * gx + gy * gy) + 1.0);
      out(r, c) = v < 0.0 ? 0.0 : v;
    }
  }
  // Sun-aligned facets can round a hair above one.
  for (std::size_t i = 0; i < out.values().size(); ++i) {
    double& v = out.values()[i];
    if (v > 1.0) v = 1.0;
    if (std::isnan(elevation.values()[i])) v = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic crater terrain

double crater_profile(double r, double radius, double depth, double rim_height) {
  const double rim_width = 0.3 * radius;
  const double t = (r - radius) / rim_width;
  double z = rim_height * std::exp(-t * t);
  if (r < radius) {
    const double q = r / radius;
    z += depth * (q * q - 1.0);
  }
  return z;
}

namespace {

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

struct ValueNoiseOctave {
  std::size_t nx, ny;
  double wavelength;
  double amplitude;
  std::vector<double> lattice;

  double eval(double x, double y) const {
    const double gx = x / wavelength;
    const double gy = y / wavelength;
    const auto ix = static_cast<std::size_t>(gx);
    const auto iy = static_cast<std::size_t>(gy);
    const double fx = smooth(gx - static_cast<double>(ix));
    const double fy = smooth(gy - static_cast<double>(iy));
    const double v00 = lattice[iy * nx + ix];
    const double v01 = lattice[iy * nx + ix + 1];
    const double v10 = lattice[(iy + 1) * nx + ix];
    const double v11 = lattice[(iy + 1) * nx + ix + 1];
    const double top = v00 + fx * (v01 - v00);
    const double bottom = v10 + fx * (v11 - v10);
    return amplitude * (top + fy * (bottom - top));
  }
};

}  // namespace

std::vector<Crater> plan_craters(const CraterSynthParams& p) {
  Rng rng(hash_combine(p.seed, 0xC7A7E5ull));
  const double lx = static_cast<double>(p.width - 1) * p.cell_size;
  const double ly = static_cast<double>(p.height - 1) * p.cell_size;
  const double extent = std::min(lx, ly);
  const double r_min = 0.01 * extent;
  const double r_max = 0.12 * extent;
  std::vector<Crater> craters;
  craters.reserve(p.crater_count);
  for (std::size_t k = 0; k < p.crater_count; ++k) {
    Crater c{};
    c.radius = r_min * std::pow(r_max / r_min, rng.uniform());
    c.x = rng.uniform(-0.5 * lx, 0.5 * lx);
    c.y = rng.uniform(-0.5 * ly, 0.5 * ly);
    c.depth = 0.2 * c.radius;
    c.rim_height = 0.04 * c.radius;
    craters.push_back(c);
  }
  if (p.crater_count == 1) {
    craters[0].x = 0.0;
    craters[0].y = 0.0;
  }
  return craters;
}

DemGrid synth_crater_dem(const CraterSynthParams& p) {
  if (p.width < 16 || p.height < 16) throw Error(Errc::invalid_argument, "synthetic DEM needs at least 16x16 cells");
  if (!(p.cell_size > 0.0)) throw Error(Errc::invalid_argument, "cell_size must be positive");

  const double lx = static_cast<double>(p.width - 1) * p.cell_size;
  const double ly = static_cast<double>(p.height - 1) * p.cell_size;
  const double extent = std::min(lx, ly);
  RasterD z(p.width, p.height, 0.0);

  // Noise is evaluated in a frame anchored at the south-west corner so lattice indices stay non-negative.
  Rng noise_rng(hash_combine(p.seed, 0x401CEull));
  std::vector<ValueNoiseOctave> octaves;
  double wavelength = extent / 4.0;
  double amplitude = 0.015 * extent;
  for (std::size_t o = 0; o < p.fractal_octaves; ++o) {
    ValueNoiseOctave oct;
    oct.wavelength = wavelength;
    oct.amplitude = amplitude;
    oct.nx = static_cast<std::size_t>(std::ceil(lx / wavelength)) + 2;
    oct.ny = static_cast<std::size_t>(std::ceil(ly / wavelength)) + 2;
    oct.lattice.resize(oct.nx * oct.ny);
    for (double& v : oct.lattice) v = noise_rng.uniform(-1.0, 1.0);
    octaves.push_back(std::move(oct));
    wavelength *= 0.5;
    amplitude *= 0.5;
  }
  for (std::size_t r = 0; r < p.height; ++r) {
    const double y = static_cast<double>(p.height - 1 - r) * p.cell_size;
    for (std::size_t c = 0; c < p.width; ++c) {
      const double x = static_cast<double>(c) * p.cell_size;
      double v = 0.0;
      for (const auto& oct : octaves) v += oct.eval(x, y);
      z(r, c) = v;
    }
  }

  const double origin_x = -0.5 * lx;
  const double origin_y = 0.5 * ly;
  for (const Crater& cr : plan_craters(p)) {
    const double reach = 1.9 * cr.radius;
    const long col_lo = std::max(0L, static_cast<long>(std::floor((cr.x - reach - origin_x) / p.cell_size)));
    const long col_hi = std::min(static_cast<long>(p.width) - 1,
                                 static_cast<long>(std::ceil((cr.x + reach - origin_x) / p.cell_size)));
    const long row_lo = std::max(0L, static_cast<long>(std::floor((origin_y - cr.y - reach) / p.cell_size)));
    const long row_hi = std::min(static_cast<long>(p.height) - 1,
                                 static_cast<long>(std::ceil((origin_y - cr.y + reach) / p.cell_size)));
    for (long r = row_lo; r <= row_hi; ++r) {
      const double y = origin_y - static_cast<double>(r) * p.cell_size;
      for (long c = col_lo; c <= col_hi; ++c) {
        const double x = origin_x + static_cast<double>(c) * p.cell_size;
        const double d = std::hypot(x - cr.x, y - cr.y);
        if (d > reach) continue;
        z(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) +=
            crater_profile(d, cr.radius, cr.depth, cr.rim_height);
      }
    }
  }

  double lo = 0.0;
  double hi = 0.0;
  for (double v : z.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double scale = 1.0;
  if (lo < kLunarMinElevation) scale = std::min(scale, kLunarMinElevation / lo);
  if (hi > kLunarMaxElevation) scale = std::min(scale, kLunarMaxElevation / hi);
  if (scale < 1.0)
    for (double& v : z.values()) v *= scale;

  return DemGrid(p.width, p.height, p.cell_size, origin_x, origin_y, std::move(z));
}

}  // namespace lunarforge
