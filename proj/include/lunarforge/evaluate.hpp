#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "json.hpp"
#include "lunarforge/dataset.hpp"
#include "lunarforge/metrics.hpp"

namespace lunarforge {

struct EvaluateOptions {
  std::filesystem::path gt;    // generated dataset root (manifest.jsonl)
  std::filesystem::path pred;  // pairs/<pair_id>/pointmap_a.f32 [+ pointmap_b.f32, pose_rel.json]
  std::vector<double> thresholds{2.0, 5.0, 15.0, 30.0};
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> report;
  std::size_t workers = 0;
  std::size_t n_profiles = 5;
};

std::vector<PairRecord> read_manifest(const std::filesystem::path& dataset_root);

/// One JSON object per pair ("type": "pair") followed by a summary object
/// ("type": "summary"). Written as JSON lines to `report` when set.
std::vector<nlohmann::json> cmd_evaluate(const EvaluateOptions& opts);

}  // namespace lunarforge
