#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "lunarforge/error.hpp"
#include "lunarforge/io.hpp"
#include "lunarforge/terrain.hpp"

namespace lunarforge {

namespace fs = std::filesystem;

DemFormat parse_dem_format(const std::string& name) {
  if (name == "ascii_grid" || name == "ascii" || name == "asc") return DemFormat::ascii_grid;
  if (name == "raw_f32" || name == "f32") return DemFormat::raw_f32;
  throw Error(Errc::invalid_argument, "unknown DEM format '" + name + "'");
}

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

double parse_number(const std::string& tok, const fs::path& path) {
  double v = 0.0;
  const auto* first = tok.data();
  const auto* last = tok.data() + tok.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) throw Error(Errc::parse_error, path.string() + ": bad number '" + tok + "'");
  return v;
}

DemGrid load_ascii(const fs::path& path) {
  std::istringstream in(io::read_text(path));
  std::map<std::string, double> header;
  static const char* kKeys[] = {"ncols", "nrows", "xllcorner", "yllcorner", "xllcenter", "yllcenter",
                                "cellsize", "nodata_value"};
  std::string line;
  std::streampos data_start = in.tellg();
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key, value;
    if (!(ls >> key)) {
      data_start = in.tellg();
      continue;
    }
    const std::string k = lower(key);
    if (std::find(std::begin(kKeys), std::end(kKeys), k) == std::end(kKeys)) break;
    if (!(ls >> value)) throw Error(Errc::parse_error, path.string() + ": header key '" + key + "' lacks a value");
    header[k] = parse_number(value, path);
    data_start = in.tellg();
  }
  for (const char* required : {"ncols", "nrows", "cellsize"}) {
    if (!header.count(required)) throw Error(Errc::parse_error, path.string() + ": missing header field " + required);
  }
  const bool corner = header.count("xllcorner") && header.count("yllcorner");
  const bool center = header.count("xllcenter") && header.count("yllcenter");
  if (!corner && !center) throw Error(Errc::parse_error, path.string() + ": missing xll/yll origin");

  const double ncols = header["ncols"];
  const double nrows = header["nrows"];
  if (ncols < 2 || nrows < 2 || ncols != std::floor(ncols) || nrows != std::floor(nrows))
    throw Error(Errc::parse_error, path.string() + ": ncols/nrows must be integers >= 2");
  const auto w = static_cast<std::size_t>(ncols);
  const auto h = static_cast<std::size_t>(nrows);
  const double cs = header["cellsize"];
  if (!(cs > 0.0)) throw Error(Errc::parse_error, path.string() + ": cellsize must be positive");
  const bool has_nodata = header.count("nodata_value") > 0;
  const double nodata = has_nodata ? header["nodata_value"] : 0.0;

  in.clear();
  in.seekg(data_start);
  RasterD z(w, h);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<std::string> toks;
    for (std::string t; ls >> t;) toks.push_back(t);
    if (toks.empty()) continue;
    if (row >= h) throw Error(Errc::dimension_mismatch, path.string() + ": more rows than nrows");
    if (toks.size() != w) {
      throw Error(Errc::dimension_mismatch, path.string() + ": row " + std::to_string(row) + " has " +
                                                std::to_string(toks.size()) + " values, expected " + std::to_string(w));
    }
    for (std::size_t c = 0; c < w; ++c) {
      const std::string lt = lower(toks[c]);
      if (lt.find("nan") != std::string::npos || lt.find("inf") != std::string::npos)
        throw Error(Errc::parse_error, path.string() + ": non-finite value without nodata marking");
      const double v = parse_number(toks[c], path);
      z(row, c) = (has_nodata && v == nodata) ? kNoData : v;
    }
    ++row;
  }
  if (row != h) throw Error(Errc::dimension_mismatch, path.string() + ": expected " + std::to_string(h) + " rows, found " + std::to_string(row));

  const double x0 = corner ? header["xllcorner"] + 0.5 * cs : header["xllcenter"];
  const double y_south = corner ? header["yllcorner"] + 0.5 * cs : header["yllcenter"];
  const double y0 = y_south + static_cast<double>(h - 1) * cs;
  return DemGrid(w, h, cs, x0, y0, std::move(z));
}

DemGrid load_raw(const fs::path& path) {
  const io::Json meta = io::read_json(io::sidecar_path(path));
  std::size_t w = 0, h = 0;
  double cs = 0.0, ox = 0.0, oy = 0.0;
  try {
    w = meta.at("width").get<std::size_t>();
    h = meta.at("height").get<std::size_t>();
    cs = meta.at("cell_size").get<double>();
    ox = meta.at("origin_x").get<double>();
    oy = meta.at("origin_y").get<double>();
  } catch (const io::Json::exception& e) {
    throw Error(Errc::parse_error, io::sidecar_path(path).string() + ": " + e.what());
  }
  if (w < 2 || h < 2) throw Error(Errc::parse_error, path.string() + ": sidecar dimensions must be >= 2");
  std::vector<double> values = io::read_f32(path, w * h);
  for (double v : values) {
    if (std::isinf(v)) throw Error(Errc::parse_error, path.string() + ": infinite elevation");
  }
  RasterD z(w, h);
  z.storage() = std::move(values);
  std::string note = "moon-fixed local tangent plane";
  if (meta.contains("frame_note") && meta["frame_note"].is_string()) note = meta["frame_note"].get<std::string>();
  return DemGrid(w, h, cs, ox, oy, std::move(z), note);
}

void write_ascii(const DemGrid& dem, const fs::path& path) {
  constexpr double kNoDataValue = -9999.0;
  const double cs = dem.cell_size();
  std::string out;
  out += "ncols " + std::to_string(dem.width()) + "\n";
  out += "nrows " + std::to_string(dem.height()) + "\n";
  out += "xllcorner " + io::format_double(dem.min_x() - 0.5 * cs) + "\n";
  out += "yllcorner " + io::format_double(dem.min_y() - 0.5 * cs) + "\n";
  out += "cellsize " + io::format_double(cs) + "\n";
  out += "NODATA_value " + io::format_double(kNoDataValue) + "\n";
  for (std::size_t r = 0; r < dem.height(); ++r) {
    for (std::size_t c = 0; c < dem.width(); ++c) {
      if (c) out += ' ';
      out += io::format_double(dem.is_nodata(r, c) ? kNoDataValue : dem.at(r, c));
    }
    out += '\n';
  }
  io::write_text(path, out);
}

void write_raw(const DemGrid& dem, const fs::path& path) {
  io::write_f32(path, dem.elevations().values());
  io::Json meta = {{"width", dem.width()},        {"height", dem.height()},     {"cell_size", dem.cell_size()},
                   {"origin_x", dem.origin_x()}, {"origin_y", dem.origin_y()}, {"frame_note", dem.frame_note()}};
  io::write_json(io::sidecar_path(path), meta);
}

}  // namespace

DemGrid load_dem(const fs::path& path, DemFormat format) {
  if (!fs::exists(path)) throw Error(Errc::io_error, "DEM file not found: " + path.string());
  return format == DemFormat::ascii_grid ? load_ascii(path) : load_raw(path);
}

void write_dem(const DemGrid& dem, const fs::path& path, DemFormat format) {
  if (format == DemFormat::ascii_grid) {
    write_ascii(dem, path);
  } else {
    write_raw(dem, path);
  }
}

}  // namespace lunarforge
