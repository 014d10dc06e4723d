#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lunarforge/raster.hpp"

namespace lunarforge {

inline constexpr double kNoData = std::numeric_limits<double>::quiet_NaN();

// Lunar elevation envelope of the south-polar DEM, meters relative to mean radius.
inline constexpr double kLunarMinElevation = -4350.0;
inline constexpr double kLunarMaxElevation = 1850.0;

/// Regular elevation raster in a local tangent-plane frame (+x east, +y north,
/// +z up). Row 0 is the northern edge. Cell (r, c) is centered at
/// (origin_x + c * cell_size, origin_y - r * cell_size). NaN marks nodata.
///
/// The grid is immutable once built; all queries are safe to share across threads.
class DemGrid {
 public:
  DemGrid(std::size_t width, std::size_t height, double cell_size, double origin_x, double origin_y,
          RasterD elevations, std::string frame_note = "moon-fixed local tangent plane");

  std::size_t width() const noexcept { return elevations_.width(); }
  std::size_t height() const noexcept { return elevations_.height(); }
  double cell_size() const noexcept { return cell_size_; }
  double origin_x() const noexcept { return origin_x_; }
  double origin_y() const noexcept { return origin_y_; }
  const std::string& frame_note() const noexcept { return frame_note_; }
  const RasterD& elevations() const noexcept { return elevations_; }

  double at(std::size_t row, std::size_t col) const { return elevations_(row, col); }
  bool is_nodata(std::size_t row, std::size_t col) const;

  double cell_x(std::size_t col) const noexcept { return origin_x_ + static_cast<double>(col) * cell_size_; }
  double cell_y(std::size_t row) const noexcept { return origin_y_ - static_cast<double>(row) * cell_size_; }

  // World extent of the cell-center lattice (the bilinear footprint).
  double min_x() const noexcept { return origin_x_; }
  double max_x() const noexcept { return cell_x(width() - 1); }
  double max_y() const noexcept { return origin_y_; }
  double min_y() const noexcept { return cell_y(height() - 1); }
  bool contains(double x, double y) const noexcept;

  // Min/max over non-nodata cells; NaN if every cell is nodata.
  double min_elevation() const noexcept { return min_; }
  double max_elevation() const noexcept { return max_; }

  // Non-empty when elevations leave the lunar envelope. Informational only.
  std::optional<std::string> lunar_range_warning() const;

 private:
  RasterD elevations_;
  double cell_size_;
  double origin_x_;
  double origin_y_;
  std::string frame_note_;
  double min_;
  double max_;
};

enum class DemFormat { ascii_grid, raw_f32 };

DemFormat parse_dem_format(const std::string& name);

// ascii_grid: ncols/nrows/xllcorner/yllcorner/cellsize/nodata_value header then
// north-up rows. raw_f32: little-endian float32 rows with a JSON sidecar at
// path.replace_extension(".json").
DemGrid load_dem(const std::filesystem::path& path, DemFormat format);
void write_dem(const DemGrid& dem, const std::filesystem::path& path, DemFormat format);

struct CraterSynthParams {
  std::uint64_t seed = 0;
  std::size_t width = 512;
  std::size_t height = 512;
  double cell_size = 5.0;
  std::size_t crater_count = 40;
  std::size_t fractal_octaves = 6;
};

// One synthesized crater; (x, y) in the world frame of the synthesized grid,
// which is centered on the origin.
struct Crater {
  double x, y, radius, depth, rim_height;
};

std::vector<Crater> plan_craters(const CraterSynthParams& params);

/// Parabolic-bowl craters with Gaussian raised rims over 1/f value noise.
/// Pure function of its arguments. Heights are compressed into the lunar
/// envelope when the superposition would leave it.
DemGrid synth_crater_dem(const CraterSynthParams& params);

// Radial crater profile used by the synthesizer: bowl of given depth inside
// `radius` plus a rim annulus peaking at r = radius.
double crater_profile(double r, double radius, double depth, double rim_height);

/// Bilinear interpolation of the four bracketing cell centers.
double sample_height(const DemGrid& dem, double x, double y);

/// Upward unit normal from central differences of sample_height (step = cell_size).
Eigen::Vector3d surface_normal(const DemGrid& dem, double x, double y);

struct SlopeMap {
  std::size_t width = 0;
  std::size_t height = 0;
  RasterD slopes;  // degrees in [0, 90); NaN where the input has nodata
  double source_spacing = 0.0;
};

/// Slope angle per cell, central differences inside and one-sided at borders.
SlopeMap slope_map(const RasterD& elevation, double spacing);

/// Lambertian shade max(0, n . s) per cell; NaN where the gradient touches nodata.
RasterD hillshade(const RasterD& elevation, double spacing, double sun_azimuth_deg,
                  double sun_elevation_deg);

}  // namespace lunarforge
