#include "lunarforge/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "lunarforge/error.hpp"

namespace lunarforge {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::parse_error: return "parse_error";
    case Errc::dimension_mismatch: return "dimension_mismatch";
    case Errc::out_of_bounds: return "out_of_bounds";
    case Errc::nodata: return "nodata";
    case Errc::degenerate: return "degenerate";
    case Errc::insufficient_data: return "insufficient_data";
    case Errc::no_consensus: return "no_consensus";
    case Errc::footprint_too_small: return "footprint_too_small";
    case Errc::behind_camera: return "behind_camera";
    case Errc::camera_below_terrain: return "camera_below_terrain";
    case Errc::io_error: return "io_error";
    case Errc::usage: return "usage";
  }
  return "unknown";
}

namespace io {

namespace fs = std::filesystem;

fs::path sidecar_path(const fs::path& data_path) {
  fs::path p = data_path;
  p.replace_extension(".json");
  return p;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::io_error, "short write to " + path.string());
}

Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw Error(Errc::parse_error, path.string() + ": " + e.what());
  }
}

namespace {

void check_finite(const Json& v) {
  if (v.is_number_float() && !std::isfinite(v.get<double>()))
    throw Error(Errc::invalid_argument, "refusing to serialize a non-finite number");
  if (v.is_structured())
    for (const auto& child : v) check_finite(child);
}

}  // namespace

void write_json(const fs::path& path, const Json& value) {
  check_finite(value);
  write_text(path, value.dump(2) + "\n");
}

std::string dump_line(const Json& value) {
  check_finite(value);
  return value.dump() + '\n';
}

void write_f32(const fs::path& path, std::span<const double> values) {
  std::string buf(values.size() * 4, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto f = static_cast<float>(values[i]);
    const auto bits = std::bit_cast<std::uint32_t>(f);
    for (int b = 0; b < 4; ++b) buf[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
  }
  write_text(path, buf);
}

std::vector<double> read_f32(const fs::path& path, std::size_t expected_count) {
  const std::string buf = read_text(path);
  if (buf.size() != expected_count * 4) {
    throw Error(Errc::dimension_mismatch, path.string() + ": expected " + std::to_string(expected_count * 4) +
                                              " bytes, found " + std::to_string(buf.size()));
  }
  std::vector<double> out(expected_count);
  for (std::size_t i = 0; i < expected_count; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[i * 4 + b])) << (8 * b);
    out[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return out;
}

void write_pgm16(const fs::path& path, const RasterD& unit_image) {
  std::string buf = "P5\n" + std::to_string(unit_image.width()) + " " + std::to_string(unit_image.height()) + "\n65535\n";
  buf.reserve(buf.size() + unit_image.size() * 2);
  for (double v : unit_image.values()) {
    const double c = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
    const auto s = static_cast<std::uint16_t>(std::lround(c * 65535.0));
    buf.push_back(static_cast<char>(s >> 8));
    buf.push_back(static_cast<char>(s & 0xFF));
  }
  write_text(path, buf);
}

void write_pgm8(const fs::path& path, const Raster<std::uint8_t>& image) {
  std::string buf = "P5\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  buf.append(reinterpret_cast<const char*>(image.storage().data()), image.size());
  write_text(path, buf);
}

Pgm read_pgm(const fs::path& path) {
  const std::string buf = read_text(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < buf.size()) {
      if (buf[pos] == '#') {
        while (pos < buf.size() && buf[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(buf[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
    return buf.substr(start, pos - start);
  };
  if (token() != "P5") throw Error(Errc::parse_error, path.string() + ": not a binary PGM");
  Pgm pgm;
  try {
    pgm.width = std::stoul(token());
    pgm.height = std::stoul(token());
    pgm.maxval = static_cast<unsigned>(std::stoul(token()));
  } catch (const std::exception&) {
    throw Error(Errc::parse_error, path.string() + ": malformed PGM header");
  }
  ++pos;  // single whitespace before raster
  const std::size_t bytes = pgm.maxval > 255 ? 2 : 1;
  const std::size_t n = pgm.width * pgm.height;
  if (buf.size() - pos != n * bytes) throw Error(Errc::dimension_mismatch, path.string() + ": PGM size mismatch");
  pgm.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + pos + i * bytes);
    pgm.samples[i] = bytes == 2 ? (static_cast<unsigned>(p[0]) << 8) | p[1] : p[0];
  }
  return pgm;
}

Json number_or_flag(double v, const char* flag) {
  if (std::isfinite(v)) return v;
  return flag;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace io
}  // namespace lunarforge
