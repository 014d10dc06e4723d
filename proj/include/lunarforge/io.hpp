#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lunarforge/raster.hpp"

namespace lunarforge::io {

using Json = nlohmann::json;

// Sidecar for a raw binary file: same stem, ".json" extension.
std::filesystem::path sidecar_path(const std::filesystem::path& data_path);

Json read_json(const std::filesystem::path& path);
// Two-space indented, trailing newline. Rejects non-finite numbers.
void write_json(const std::filesystem::path& path, const Json& value);
// Compact single-line dump with a trailing newline (JSON lines).
std::string dump_line(const Json& value);

// Little-endian float32 streams; values are narrowed from double.
void write_f32(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_f32(const std::filesystem::path& path, std::size_t expected_count);

// Binary PGM (P5). 16-bit samples are big-endian per the format; values in
// [0, 1] are scaled by maxval and rounded.
void write_pgm16(const std::filesystem::path& path, const RasterD& unit_image);
void write_pgm8(const std::filesystem::path& path, const Raster<std::uint8_t>& image);
struct Pgm {
  std::size_t width = 0, height = 0;
  unsigned maxval = 0;
  std::vector<unsigned> samples;
};
Pgm read_pgm(const std::filesystem::path& path);

// Number or the string flag, since JSON output never carries NaN literals.
Json number_or_flag(double v, const char* flag = "degenerate");

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

// Shortest representation that round-trips through strtod.
std::string format_double(double v);

}  // namespace lunarforge::io
