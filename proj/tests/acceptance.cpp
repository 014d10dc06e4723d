// Acceptance checks. Prints one PASS/FAIL line per criterion; exits nonzero
// if any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "json.hpp"
#include "lunarforge/camera.hpp"
#include "lunarforge/dataset.hpp"
#include "lunarforge/evaluate.hpp"
#include "lunarforge/heightfield.hpp"
#include "lunarforge/metrics.hpp"
#include "lunarforge/pose.hpp"
#include "lunarforge/renderer.hpp"
#include "lunarforge/terrain.hpp"
#include "lunarforge/trajectory.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace lunarforge;
namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string(LUNARFORGE_CLI) + " " + args + " >" + log.string() + ".out 2>" + log.string() + ".err";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<Json> read_jsonl(const fs::path& p) {
  std::ifstream f(p);
  std::vector<Json> out;
  for (std::string line; std::getline(f, line);)
    if (!line.empty()) out.push_back(Json::parse(line));
  return out;
}

double num(const Json& j, const char* key) {
  const Json& v = j.at(key);
  if (!v.is_number()) throw std::runtime_error(std::string(key) + " is not a number: " + v.dump());
  return v.get<double>();
}

// 1 ---------------------------------------------------------------------------
Outcome gsd_table() {
  const double km[] = {3.5, 6.2, 9.5, 12.8, 16.1, 19.4, 22.7, 26.0, 29.2, 30.5};
  const double table[] = {5.7, 10.0, 15.4, 20.7, 26.0, 31.4, 36.7, 42.1, 47.2, 49.3};
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) worst = std::max(worst, std::abs(gsd(km[i] * 1000.0, 45.0, 512) - table[i]));
  return {worst <= 0.1, "max |gsd - table| = " + fmt(worst) + " m/px"};
}

// 2 ---------------------------------------------------------------------------
Outcome analytic_render() {
  const double ground = -420.0;
  const DemGrid dem = oracle::flat_dem(512, 10.0, ground);
  const Intrinsics intr = Intrinsics::from_fov(128, 128, 45.0);
  const Eigen::Vector3d eye(37.0, -55.0, 3080.0);
  const Pose pose = look_at(eye, Eigen::Vector3d(37.0, -55.0, ground), 20.0);
  RenderSettings rs;
  rs.sun = lighting_preset("overhead");
  const RenderProduct p = render_view(dem, intr, pose, 0.0, 1, rs);

  const double f = 64.0 / std::tan(22.5 * M_PI / 180.0);
  double worst = 0.0;
  std::size_t bad = 0;
  for (std::size_t r = 0; r < 128; ++r)
    for (std::size_t c = 0; c < 128; ++c) {
      const Eigen::Vector3d d_cam((static_cast<double>(c) - 63.5) / f, -(static_cast<double>(r) - 63.5) / f, -1.0);
      const Eigen::Vector3d d = pose.rotation() * d_cam.normalized();
      const double expect = (eye.z() - ground) / -d.z();
      const double got = p.depth(r, c);
      if (!std::isfinite(got)) {
        ++bad;
        continue;
      }
      worst = std::max(worst, std::abs(got - expect) / expect);
    }
  return {bad == 0 && worst <= 1e-6, "max relative error " + fmt(worst) + ", invalid pixels " + std::to_string(bad)};
}

// 3 ---------------------------------------------------------------------------
Outcome intersection_oracle() {
  double worst = 0.0;
  std::size_t rays = 0, hits = 0, mismatched = 0;
  for (std::uint64_t seed : {101u, 202u, 303u}) {
    CraterSynthParams sp;
    sp.seed = seed;
    sp.width = 200;
    sp.height = 200;
    const DemGrid dem = synth_crater_dem(sp);
    const HeightfieldTracer tracer(dem);
    std::mt19937_64 g(seed);
    std::uniform_real_distribution<double> ux(dem.min_x(), dem.max_x()), uy(dem.min_y(), dem.max_y());
    std::uniform_real_distribution<double> lift(5.0, 600.0), slant(-1.5, 1.5);
    for (int i = 0; i < 10000; ++i) {
      const Eigen::Vector3d o(ux(g), uy(g), dem.max_elevation() + lift(g));
      const Eigen::Vector3d d = Eigen::Vector3d(slant(g), slant(g), -1.0).normalized();
      const auto fast = tracer.intersect({o, d});
      const auto slow = oracle::march(dem, o, d);
      ++rays;
      if (fast.has_value() != slow.has_value()) {
        ++mismatched;
        continue;
      }
      if (!fast) continue;
      ++hits;
      const double err = std::abs(fast->depth - *slow) / dem.cell_size();
      worst = std::max(worst, err);
    }
  }
  const bool ok = mismatched == 0 && worst <= 2e-3 && hits > rays / 2;
  return {ok, std::to_string(rays) + " rays, " + std::to_string(hits) + " hits, " + std::to_string(mismatched) +
                  " hit/miss disagreements, max |depth diff| = " + fmt(worst) + " cell"};
}

// 4 ---------------------------------------------------------------------------
Outcome pose_recovery() {
  SamplerOptions so;
  so.intrinsics = Intrinsics::from_fov(128, 128, 45.0);
  so.psf_sigma = 0.0;
  so.rays_per_pixel = 1;
  RenderSettings rs;
  rs.sun = lighting_preset("side");

  double worst_rra = 0.0, worst_rta = 0.0, worst_pnp_rot = 0.0, worst_pnp_pos = 0.0;
  std::size_t pairs = 0, failures = 0, flagged = 0;
  std::string first_failure;
  for (TrajectoryKind kind : {TrajectoryKind::nadir, TrajectoryKind::oblique, TrajectoryKind::dynamic}) {
    for (std::size_t i = 0; i < 20; ++i) {
      const std::size_t band = i % 10;
      const std::uint64_t seed = 1000 + i;
      ++pairs;
      const std::string tag = to_string(kind) + " band " + std::to_string(band) + " seed " + std::to_string(seed);
      try {
        const DemGrid dem = synth_dem_for(kind, band, seed, 256, so);
        const SampledPair pair = sample_pair(kind, seed, band, dem, so);
        const RenderedPair rp = render_pair(dem, pair.rig, rs);
        const CorrespondenceSet corr = gt_correspondences(rp.a, rp.b);
        const Pose rel = relative_pose(pair.rig.pose_a, pair.rig.pose_b);

        RansacParams rp_params;
        rp_params.seed = seed;
        const EssentialEstimate est = estimate_essential(corr.pairs, so.intrinsics, so.intrinsics, rp_params);
        if (est.degenerate) {
          ++flagged;
          ++failures;
          if (first_failure.empty()) first_failure = tag + ": flagged degenerate";
          continue;
        }
        const double e_r = rra(rel.rotation(), est.relative_pose.rotation());
        const double e_t = rta(rel.translation(), est.relative_pose.translation());
        worst_rra = std::max(worst_rra, e_r);
        worst_rta = std::max(worst_rta, e_t);

        // 2D-3D matches from view b: pixel and its world point.
        std::vector<Match2D3D> m;
        for (std::size_t r = 0; r < 128; r += 3)
          for (std::size_t c = 0; c < 128; c += 3) {
            const double z = rp.b.depth(r, c);
            if (!std::isfinite(z)) continue;
            const double u = static_cast<double>(c), v = static_cast<double>(r);
            m.push_back({u, v, unproject(so.intrinsics, pair.rig.pose_b, u, v, z)});
          }
        const PnpEstimate pnp = solve_pnp(m, so.intrinsics, rp_params);
        const double rot_rad = rra(pair.rig.pose_b.rotation(), pnp.pose.rotation()) * M_PI / 180.0;
        const double pos_rel =
            (pnp.pose.translation() - pair.rig.pose_b.translation()).norm() / pair.spec.altitude_m;
        worst_pnp_rot = std::max(worst_pnp_rot, rot_rad);
        worst_pnp_pos = std::max(worst_pnp_pos, pos_rel);
        if (!(e_r < 0.1 && e_t < 0.1 && rot_rad < 1e-3 && pos_rel < 1e-3)) {
          ++failures;
          if (first_failure.empty())
            first_failure = tag + ": rra " + fmt(e_r) + " rta " + fmt(e_t) + " pnp " + fmt(rot_rad) + " rad " +
                            fmt(pos_rel) + " alt";
        }
      } catch (const std::exception& e) {
        ++failures;
        if (first_failure.empty()) first_failure = tag + ": " + e.what();
      }
    }
  }
  std::string detail = std::to_string(pairs) + " pairs, max RRA " + fmt(worst_rra) + " deg, max RTA " + fmt(worst_rta) +
                       " deg, PnP max " + fmt(worst_pnp_rot) + " rad / " + fmt(worst_pnp_pos) + " alt, flagged " +
                       std::to_string(flagged);
  if (!first_failure.empty()) detail += "; first failure: " + first_failure;
  return {failures == 0, detail};
}

// 5 ---------------------------------------------------------------------------
Outcome metric_identity(const fs::path& scratch) {
  std::size_t checked = 0;
  std::string problem;
  for (const char* kind : {"nadir", "oblique", "dynamic"}) {
    const fs::path ds = scratch / (std::string("identity_") + kind);
    const fs::path log = scratch / (std::string("identity_") + kind);
    if (run_cli(std::string("generate --synth --trajectory ") + kind +
                    " --bands 0,5,9 --pairs 1 --lighting side --width 64 --dem-size 192 --seed 5 --out " + ds.string(),
                log) != 0)
      return {false, std::string("generate failed for ") + kind};
    const fs::path report = scratch / (std::string("identity_") + kind + ".jsonl");
    if (run_cli("evaluate --gt " + ds.string() + " --pred " + ds.string() + " --report " + report.string(), log) != 0)
      return {false, std::string("evaluate failed for ") + kind};
    const auto lines = read_jsonl(report);
    for (const Json& l : lines) {
      if (l.at("type") == "summary") {
        if (l.at("status") != "ok" || l.at("evaluated") != 3) problem = "summary status " + l.dump();
        if (num(l.at("rra_accuracy"), "2") != 1.0 || num(l.at("rta_accuracy"), "2") != 1.0)
          problem = std::string(kind) + ": RRA@2/RTA@2 below 100%";
        continue;
      }
      ++checked;
      const Json& m = l.at("metrics");
      const std::string id = l.at("pair_id");
      for (const char* k : {"accuracy_m", "completeness_m", "chamfer_m"})
        if (!(num(m, k) < 1e-6)) problem = id + " " + k + " = " + m.at(k).dump();
      for (const char* k : {"slope_corr", "ssim", "profile_corr"})
        if (!(std::abs(num(m, k) - 1.0) < 1e-9)) problem = id + " " + k + " = " + m.at(k).dump();
      if (!(num(m, "si_loss") < 1e-12)) problem = id + " si_loss = " + m.at("si_loss").dump();
    }
  }
  return {problem.empty() && checked == 9, std::to_string(checked) + " pairs checked" + (problem.empty() ? "" : "; " + problem)};
}

// 6 ---------------------------------------------------------------------------
PointMap transformed(const PointMap& pm, const SimilarityTransform& t) {
  PointMap out = pm;
  for (std::size_t i = 0; i < out.points.size(); ++i)
    if (out.valid_mask[i]) out.points[i] = t.apply(out.points[i]);
  return out;
}

Outcome alignment_absorption() {
  SamplerOptions so;
  so.intrinsics = Intrinsics::from_fov(128, 128, 45.0);
  so.psf_sigma = 0.0;
  so.rays_per_pixel = 1;
  RenderSettings rs;
  rs.sun = lighting_preset("side");
  std::mt19937_64 g(77);
  std::uniform_real_distribution<double> shift(-5000.0, 5000.0);
  double worst = 0.0;
  std::size_t cases = 0;
  for (TrajectoryKind kind : {TrajectoryKind::nadir, TrajectoryKind::oblique, TrajectoryKind::dynamic}) {
    const std::size_t band = 4;
    const DemGrid dem = synth_dem_for(kind, band, 31, 256, so);
    const SampledPair pair = sample_pair(kind, 31, band, dem, so);
    const RenderedPair rp = render_pair(dem, pair.rig, rs);
    PairTruth truth;
    truth.pose_a = pair.rig.pose_a;
    truth.relative_pose = relative_pose(pair.rig.pose_a, pair.rig.pose_b);
    truth.pointmap_a = depth_to_pointmap(rp.a, PointFrame::view1, pair.rig.pose_a);
    truth.pointmap_b = depth_to_pointmap(rp.b, PointFrame::view1, pair.rig.pose_a);
    EvalConfig cfg;
    cfg.gsd_m = gsd(pair.spec.altitude_m, 45.0, 128);
    for (double s : {0.5, 2.0}) {
      SimilarityTransform t;
      t.scale = s;
      Eigen::Quaterniond q(Eigen::Vector4d(shift(g), shift(g), shift(g), shift(g)));
      t.rotation = q.normalized().toRotationMatrix();
      t.translation = Eigen::Vector3d(shift(g), shift(g), shift(g));
      PairPrediction pred{transformed(truth.pointmap_a, t), transformed(*truth.pointmap_b, t), truth.relative_pose};
      const MetricsReport r = evaluate_pair(pred, truth, cfg);
      worst = std::max({worst, r.accuracy_m, r.completeness_m, r.chamfer_m});
      ++cases;
    }
  }
  return {worst < 1e-6, std::to_string(cases) + " cases, max aligned distance " + fmt(worst) + " m"};
}

// 7 ---------------------------------------------------------------------------
Outcome scale_invariance() {
  std::mt19937_64 g(9);
  std::normal_distribution<double> n(0.0, 300.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    PointMap pred, gt;
    pred.width = gt.width = 96;
    pred.height = gt.height = 64;
    const std::size_t total = 96 * 64;
    pred.points.resize(total);
    gt.points.resize(total);
    pred.valid_mask = Mask(96, 64, 1);
    gt.valid_mask = Mask(96, 64, 1);
    for (std::size_t i = 0; i < total; ++i) {
      gt.points[i] = Eigen::Vector3d(n(g), n(g), n(g) - 4000.0);
      pred.points[i] = Eigen::Vector3d(n(g), n(g), n(g) - 2000.0);
      if (u(g) < 0.1) {
        pred.valid_mask[i] = 0;
        pred.points[i] = Eigen::Vector3d::Constant(std::nan(""));
      }
      if (u(g) < 0.1) {
        gt.valid_mask[i] = 0;
        gt.points[i] = Eigen::Vector3d::Constant(std::nan(""));
      }
    }
    const double base = scale_invariant_loss(pred, gt);
    for (double s : {1e-3, 1.0, 1e3}) {
      PointMap scaled = pred;
      for (std::size_t i = 0; i < total; ++i)
        if (scaled.valid_mask[i]) scaled.points[i] *= s;
      worst = std::max(worst, std::abs(scale_invariant_loss(scaled, gt) - base));
    }
  }
  return {worst <= 1e-12, "max |loss(s*pred) - loss(pred)| = " + fmt(worst)};
}

// 8 ---------------------------------------------------------------------------
std::vector<Eigen::Vector3d> random_cloud(std::mt19937_64& g, int style) {
  std::uniform_real_distribution<double> u(-500.0, 500.0);
  std::normal_distribution<double> n(0.0, 20.0);
  std::vector<Eigen::Vector3d> pts;
  const Eigen::Vector3d centers[3] = {{-300, 0, 0}, {200, 250, 40}, {50, -200, -60}};
  for (int i = 0; i < 200; ++i) {
    if (style == 0) {
      pts.emplace_back(u(g), u(g), u(g));
    } else if (style == 1) {
      const double x = u(g), y = u(g);
      pts.emplace_back(x, y, 30.0 * std::sin(0.01 * x) + n(g) * 0.1);
    } else {
      pts.push_back(centers[i % 3] + Eigen::Vector3d(n(g), n(g), n(g)));
    }
  }
  return pts;
}

Outcome chamfer_equivalence() {
  std::mt19937_64 g(2024);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto a = random_cloud(g, i % 3);
    const auto b = random_cloud(g, (i + 1) % 3);
    const ChamferResult fast = accuracy_completeness(a, b, 1 + static_cast<std::size_t>(i % 3));
    const ChamferResult slow = accuracy_completeness_brute(a, b);
    worst = std::max({worst, std::abs(fast.accuracy_m - slow.accuracy_m),
                      std::abs(fast.completeness_m - slow.completeness_m), std::abs(fast.chamfer_m - slow.chamfer_m)});
  }
  return {worst <= 1e-9, "50 pairs, max |index - brute| = " + fmt(worst) + " m"};
}

// 9 ---------------------------------------------------------------------------
Outcome determinism(const fs::path& scratch) {
  const std::string common =
      "generate --synth --trajectory dynamic --bands 0,4 --pairs 2 --lighting side,back --width 64 --dem-size 160 "
      "--seed 42 --out ";
  const fs::path a = scratch / "det_a", b = scratch / "det_b", c = scratch / "det_c";
  if (run_cli(common + a.string() + " --threads 1", scratch / "det_a") != 0) return {false, "first run failed"};
  if (run_cli(common + b.string() + " --threads 1", scratch / "det_b") != 0) return {false, "second run failed"};
  if (run_cli(common + c.string() + " --threads 8", scratch / "det_c") != 0) return {false, "8-thread run failed"};
  const auto ta = testing::tree_contents(a);
  const bool same_runs = ta == testing::tree_contents(b);
  const bool same_threads = ta == testing::tree_contents(c);
  return {same_runs && same_threads && ta.size() > 8,
          std::to_string(ta.size()) + " files; repeat run " + (same_runs ? "identical" : "DIFFERS") +
              "; 1 vs 8 threads " + (same_threads ? "identical" : "DIFFERS")};
}

// 10 --------------------------------------------------------------------------
Outcome degenerate_inputs(const fs::path& scratch) {
  std::string problem;

  // Same pose for both views.
  const fs::path same = scratch / "same_pose";
  if (run_cli("generate --synth --trajectory nadir --stress same-pose --bands 0 --pairs 1 --lighting side --width 64 "
              "--dem-size 160 --seed 3 --out " + same.string(),
              scratch / "same_pose") != 0)
    return {false, "same-pose generate failed"};
  const fs::path same_report = scratch / "same_pose.jsonl";
  if (run_cli("evaluate --gt " + same.string() + " --pred " + same.string() + " --report " + same_report.string(),
              scratch / "same_pose_eval") != 0)
    return {false, "same-pose evaluate failed"};
  const auto same_lines = read_jsonl(same_report);
  const Json& ssum = same_lines.back();
  if (ssum.at("rta_degenerate_pairs").size() != 1) problem = "rta_degenerate_pairs = " + ssum.at("rta_degenerate_pairs").dump();
  if (same_lines.front().at("metrics").at("rta_deg") != "degenerate") problem = "rta_deg not flagged";

  // The estimator flags the same-pose correspondences as rotation-only.
  const PairRecord rec = read_manifest(same).front();
  const auto corr = read_correspondences(same / rec.paths.correspondences);
  const Intrinsics intr = Intrinsics::from_fov(64, 64, 45.0);
  const EssentialEstimate est = estimate_essential(corr, intr, intr);
  if (!est.degenerate) problem = "estimate_essential did not flag the zero baseline";

  // Disjoint footprints.
  const fs::path disjoint = scratch / "disjoint";
  if (run_cli("generate --synth --trajectory nadir --stress disjoint --allow-disjoint --bands 0 --pairs 1 --lighting "
              "side --width 64 --dem-size 160 --seed 3 --out " + disjoint.string(),
              scratch / "disjoint") != 0)
    return {false, "disjoint generate failed"};
  const PairRecord drec = read_manifest(disjoint).front();
  if (drec.correspondence_count != 0) problem = "disjoint correspondence count " + std::to_string(drec.correspondence_count);
  const fs::path dis_report = scratch / "disjoint.jsonl";
  const int code = run_cli("evaluate --gt " + disjoint.string() + " --pred " + disjoint.string() + " --report " +
                               dis_report.string(),
                           scratch / "disjoint_eval");
  if (code != 0) return {false, "disjoint evaluate exited with " + std::to_string(code)};
  const auto dis_lines = read_jsonl(dis_report);
  const std::string dis_status = dis_lines.front().at("status");
  return {problem.empty(), "same-pose flagged, disjoint correspondences " + std::to_string(drec.correspondence_count) +
                               ", disjoint evaluation status " + dis_status + (problem.empty() ? "" : "; " + problem)};
}

}  // namespace

int main() {
  const fs::path scratch = testing::scratch("acceptance");
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gsd table", gsd_table},
      {"analytic flat render", analytic_render},
      {"intersection vs fine-step march", intersection_oracle},
      {"pose recovery closed loop", pose_recovery},
      {"metric identity", [&] { return metric_identity(scratch); }},
      {"alignment absorption", alignment_absorption},
      {"si-loss scale invariance", scale_invariance},
      {"chamfer vs brute force", chamfer_equivalence},
      {"determinism", [&] { return determinism(scratch); }},
      {"degenerate inputs", [&] { return degenerate_inputs(scratch); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::printf("%s %2zu %-34s %7.2fs  %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
