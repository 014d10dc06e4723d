#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "lunarforge/error.hpp"

namespace testing {

// Fresh scratch directory under LUNARFORGE_TEST_TMP (or the system temp dir).
inline std::filesystem::path scratch(const std::string& name) {
  const char* env = std::getenv("LUNARFORGE_TEST_TMP");
  const std::filesystem::path base = env ? std::filesystem::path(env) : std::filesystem::temp_directory_path() / "lunarforge-tests";
  const auto dir = base / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Relative path -> file contents for every regular file below root.
inline std::map<std::string, std::string> tree_contents(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream f(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    out[std::filesystem::relative(e.path(), root).generic_string()] = ss.str();
  }
  return out;
}

template <typename F>
lunarforge::Errc error_code_of(F&& f) {
  try {
    f();
  } catch (const lunarforge::Error& e) {
    return e.code();
  }
  throw std::runtime_error("expected a lunarforge::Error");
}

}  // namespace testing
