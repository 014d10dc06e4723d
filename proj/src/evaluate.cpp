#include "lunarforge/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "lunarforge/error.hpp"
#include "lunarforge/io.hpp"
#include "lunarforge/parallel.hpp"

namespace fs = std::filesystem;

namespace lunarforge {

using io::Json;

std::vector<PairRecord> read_manifest(const fs::path& dataset_root) {
  std::istringstream in(io::read_text(dataset_root / "manifest.jsonl"));
  std::vector<PairRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const Json j = Json::parse(line);
      if (j.value("type", std::string{}) == "header") continue;
      out.push_back(j.get<PairRecord>());
    } catch (const Json::exception& e) {
      throw Error(Errc::parse_error, "manifest line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001B3ull;
  return h;
}

struct Accumulator {
  std::map<std::string, double> sums;
  std::map<std::string, std::size_t> counts;

  void add(const std::string& key, const std::optional<double>& v) {
    if (!v || !std::isfinite(*v)) return;
    sums[key] += *v;
    counts[key] += 1;
  }
  void add(const MetricsReport& r) {
    add("accuracy_m", r.accuracy_m);
    add("completeness_m", r.completeness_m);
    add("chamfer_m", r.chamfer_m);
    add("accuracy_rel", r.accuracy_rel);
    add("completeness_rel", r.completeness_rel);
    add("chamfer_rel", r.chamfer_rel);
    add("slope_corr", r.slope_corr);
    add("slope_mae_deg", r.slope_mae_deg);
    add("profile_mae_m", r.profile_mae_m);
    add("profile_corr", r.profile_corr);
    add("ssim", r.ssim);
    add("si_loss", r.si_loss);
    add("rra_deg", r.rra_deg);
    add("rta_deg", r.rta_deg);
  }
  Json means() const {
    Json j = Json::object();
    for (const auto& [k, s] : sums) j[k] = s / static_cast<double>(counts.at(k));
    j["pairs"] = counts.empty() ? 0 : counts.at("chamfer_m");
    return j;
  }
};

Json accuracy_json(const std::vector<double>& errors, const std::vector<double>& thresholds) {
  if (errors.empty()) return "degenerate";
  const std::vector<double> frac = pose_accuracy_table(errors, thresholds);
  Json j = Json::object();
  for (std::size_t i = 0; i < thresholds.size(); ++i) j[io::format_double(thresholds[i])] = frac[i];
  return j;
}

}  // namespace

std::vector<Json> cmd_evaluate(const EvaluateOptions& opts) {
  if (opts.thresholds.empty()) throw Error(Errc::usage, "at least one threshold is required");
  if (!std::is_sorted(opts.thresholds.begin(), opts.thresholds.end()))
    throw Error(Errc::usage, "thresholds must be sorted ascending");
  if (!fs::is_directory(opts.pred)) throw Error(Errc::io_error, opts.pred.string() + " is not a directory");
  const std::vector<PairRecord> records = read_manifest(opts.gt);
  const std::size_t workers = opts.workers == 0 ? default_worker_count() : opts.workers;

  std::vector<Json> lines;
  std::vector<std::string> missing, failed, rta_degenerate;
  std::vector<double> rra_errors, rta_errors;
  Accumulator overall;
  std::map<std::string, Accumulator> by_kind;

  for (const PairRecord& rec : records) {
    Json line = {{"type", "pair"}, {"pair_id", rec.pair_id}, {"kind", to_string(rec.trajectory.kind)}};
    const fs::path pred_dir = opts.pred / "pairs" / rec.pair_id;
    if (!fs::exists(pred_dir / "pointmap_a.f32")) {
      line["status"] = "missing";
      missing.push_back(rec.pair_id);
      lines.push_back(std::move(line));
      continue;
    }
    try {
      PairTruth gt;
      gt.pointmap_a = read_pointmap(opts.gt / rec.paths.pointmap_a);
      gt.pointmap_b = read_pointmap(opts.gt / rec.paths.pointmap_b);
      const Json meta = io::read_json(opts.gt / rec.paths.meta);
      gt.pose_a = meta.at("pose_a").get<Pose>();
      gt.relative_pose = meta.at("pose_rel").get<Pose>();

      PairPrediction pred;
      pred.pointmap_a = read_pointmap(pred_dir / "pointmap_a.f32");
      if (fs::exists(pred_dir / "pointmap_b.f32")) pred.pointmap_b = read_pointmap(pred_dir / "pointmap_b.f32");
      if (fs::exists(pred_dir / "pose_rel.json")) pred.relative_pose = io::read_json(pred_dir / "pose_rel.json").get<Pose>();

      EvalConfig cfg;
      cfg.gsd_m = rec.gsd_m;
      cfg.n_profiles = opts.n_profiles;
      cfg.ransac.seed = hash_combine(opts.seed, fnv1a(rec.pair_id));
      cfg.workers = workers;
      const MetricsReport r = evaluate_pair(pred, gt, cfg);
      line["status"] = "ok";
      line["metrics"] = r;
      overall.add(r);
      by_kind[to_string(rec.trajectory.kind)].add(r);
      if (r.rra_deg) rra_errors.push_back(*r.rra_deg);
      if (r.rta_deg) rta_errors.push_back(*r.rta_deg);
      if (r.rta_degenerate) rta_degenerate.push_back(rec.pair_id);
    } catch (const Error& e) {
      line["status"] = "failed";
      line["error"] = std::string(errc_name(e.code()));
      line["message"] = e.what();
      failed.push_back(rec.pair_id);
    }
    lines.push_back(std::move(line));
  }

  const std::size_t evaluated = records.size() - missing.size() - failed.size();
  Json summary = {{"type", "summary"},
                  {"pairs", records.size()},
                  {"evaluated", evaluated},
                  {"missing", missing},
                  {"failed", failed},
                  {"thresholds", opts.thresholds},
                  {"rra_accuracy", accuracy_json(rra_errors, opts.thresholds)},
                  {"rta_accuracy", accuracy_json(rta_errors, opts.thresholds)},
                  {"rta_degenerate_pairs", rta_degenerate},
                  {"warning", evaluated == 0 || !missing.empty() || !failed.empty()}};
  if (!records.empty() && missing.size() == records.size()) summary["status"] = "all-missing";
  else if (evaluated == 0) summary["status"] = "none-evaluated";
  else summary["status"] = "ok";
  summary["mean"] = overall.means();
  Json kinds = Json::object();
  for (const auto& [k, acc] : by_kind) kinds[k] = acc.means();
  summary["mean_by_kind"] = kinds;
  lines.push_back(std::move(summary));

  if (opts.report) {
    std::string text;
    for (const auto& l : lines) text += io::dump_line(l);
    io::write_text(*opts.report, text);
  }
  return lines;
}

}  // namespace lunarforge
