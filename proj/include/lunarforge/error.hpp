#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lunarforge {

enum class Errc {
  invalid_argument,
  parse_error,
  dimension_mismatch,
  out_of_bounds,
  nodata,
  degenerate,
  insufficient_data,
  no_consensus,
  footprint_too_small,
  behind_camera,
  camera_below_terrain,
  io_error,
  usage,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace lunarforge
