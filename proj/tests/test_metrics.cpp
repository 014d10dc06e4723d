#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "lunarforge/dataset.hpp"
#include "lunarforge/metrics.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace lunarforge;

namespace {

std::vector<Eigen::Vector3d> cloud(std::uint64_t seed, std::size_t n, double spread = 100.0) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(-spread, spread);
  std::vector<Eigen::Vector3d> out(n);
  for (auto& p : out) p = Eigen::Vector3d(u(g), u(g), u(g));
  return out;
}

RasterD wavy(std::size_t w, std::size_t h) {
  RasterD z(w, h);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c)
      z(r, c) = 1000.0 + 40.0 * std::sin(0.21 * static_cast<double>(c)) * std::cos(0.13 * static_cast<double>(r)) +
                0.7 * static_cast<double>(r);
  return z;
}

// Direct per-window SSIM with a 2D Gaussian window; no separable filtering.
double ssim_oracle(const RasterD& x, const RasterD& y, double L) {
  const auto t = gaussian_taps(11, 1.5);
  const double c1 = (0.01 * L) * (0.01 * L), c2 = (0.03 * L) * (0.03 * L);
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r + 11 <= x.height(); ++r)
    for (std::size_t c = 0; c + 11 <= x.width(); ++c) {
      double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
      for (std::size_t i = 0; i < 11; ++i)
        for (std::size_t j = 0; j < 11; ++j) {
          const double w = t[i] * t[j], a = x(r + i, c + j), b = y(r + i, c + j);
          mx += w * a;
          my += w * b;
          xx += w * a * a;
          yy += w * b * b;
          xy += w * a * b;
        }
      const double sx = xx - mx * mx, sy = yy - my * my, sxy = xy - mx * my;
      acc += ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sx + sy + c2));
      ++n;
    }
  return acc / static_cast<double>(n);
}

struct RenderedTruth {
  PairTruth truth;
  double gsd = 0.0;
};

RenderedTruth rendered_truth(std::size_t band) {
  SamplerOptions so;
  so.intrinsics = Intrinsics::from_fov(128, 128, 45.0);
  so.psf_sigma = 0.0;
  const DemGrid dem = synth_dem_for(TrajectoryKind::oblique, band, 17, 256, so);
  const SampledPair pair = sample_pair(TrajectoryKind::oblique, 17, band, dem, so);
  RenderSettings rs;
  rs.sun = lighting_preset("side");
  const RenderedPair rp = render_pair(dem, pair.rig, rs);
  RenderedTruth out;
  out.truth.pose_a = pair.rig.pose_a;
  out.truth.relative_pose = relative_pose(pair.rig.pose_a, pair.rig.pose_b);
  out.truth.pointmap_a = depth_to_pointmap(rp.a, PointFrame::view1, pair.rig.pose_a);
  out.truth.pointmap_b = depth_to_pointmap(rp.b, PointFrame::view1, pair.rig.pose_a);
  out.gsd = gsd(pair.spec.altitude_m, 45.0, 128);
  return out;
}

PointMap transformed(const PointMap& pm, const SimilarityTransform& t) {
  PointMap out = pm;
  for (std::size_t i = 0; i < out.points.size(); ++i)
    if (out.valid_mask[i]) out.points[i] = t.apply(out.points[i]);
  return out;
}

}  // namespace

TEST_CASE("chamfer family") {
  const auto a = cloud(1, 300);
  const ChamferResult same = accuracy_completeness(a, a);
  CHECK(same.accuracy_m == 0.0);
  CHECK(same.chamfer_m == 0.0);

  // A lattice shifted by less than half its pitch: every nearest neighbor is the shifted twin.
  std::vector<Eigen::Vector3d> lattice, shifted;
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j) {
      lattice.emplace_back(10.0 * i, 10.0 * j, 0.0);
      shifted.emplace_back(10.0 * i, 10.0 * j, 3.0);
    }
  const ChamferResult off = accuracy_completeness(shifted, lattice);
  CHECK(off.accuracy_m == doctest::Approx(3.0));
  CHECK(off.completeness_m == doctest::Approx(3.0));
  CHECK(off.chamfer_m == doctest::Approx(3.0));

  for (std::uint64_t k = 0; k < 20; ++k) {
    const auto p = cloud(100 + k, 200), g = cloud(200 + k, 200);
    const ChamferResult fast = accuracy_completeness(p, g, 2), brute = accuracy_completeness_brute(p, g);
    CHECK(std::abs(fast.accuracy_m - brute.accuracy_m) < 1e-9);
    CHECK(std::abs(fast.completeness_m - brute.completeness_m) < 1e-9);
    CHECK(std::abs(fast.chamfer_m - 0.5 * (fast.accuracy_m + fast.completeness_m)) < 1e-9);
    const ChamferResult swapped = accuracy_completeness(g, p);
    CHECK(swapped.accuracy_m == fast.completeness_m);
    CHECK(swapped.completeness_m == fast.accuracy_m);
  }
  CHECK_THROWS_AS(accuracy_completeness({}, a), Error);
}

TEST_CASE("relative error and scene scale") {
  CHECK(relative_error(100.0, 10000.0) == doctest::Approx(0.01));
  CHECK(relative_error(0.0, 5.0) == 0.0);
  CHECK_THROWS_AS(relative_error(1.0, 0.0), Error);
  auto g = cloud(3, 500);
  const double s1 = scene_scale(g);
  for (auto& p : g) p *= 2.0;
  CHECK(scene_scale(g) == doctest::Approx(2.0 * s1).epsilon(1e-12));
  CHECK(relative_error(7.0, scene_scale(g)) == doctest::Approx(0.5 * relative_error(7.0, s1)).epsilon(1e-12));
}

TEST_CASE("pearson") {
  CHECK(*pearson({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0));
  CHECK(*pearson({1, 2, 3}, {3, 2, 1}) == doctest::Approx(-1.0));
  CHECK_FALSE(pearson({1, 1, 1}, {1, 2, 3}).has_value());
  CHECK_FALSE(pearson({1}, {1}).has_value());
  std::mt19937_64 g(1);
  std::normal_distribution<double> nd;
  std::vector<double> a(100), b(100);
  for (int i = 0; i < 100; ++i) {
    a[i] = nd(g);
    b[i] = a[i] + nd(g);
  }
  CHECK(*pearson(a, b) == doctest::Approx(oracle::pearson(a, b)).epsilon(1e-10));
}

TEST_CASE("slope metrics") {
  const RasterD gt = wavy(60, 50);
  const SlopeMetrics same = slope_metrics(gt, gt, 5.0);
  REQUIRE(same.corr);
  CHECK(*same.corr == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(same.mae_deg == 0.0);
  CHECK(same.cells == 3000);

  RasterD shifted = gt;
  for (double& v : shifted.values()) v += 250.0;
  const SlopeMetrics sh = slope_metrics(shifted, gt, 5.0);
  CHECK(*sh.corr == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(sh.mae_deg < 1e-9);

  RasterD neg = gt;
  for (double& v : neg.values()) v = -v;
  const SlopeMap sa = slope_map(neg, 5.0), sb = slope_map(gt, 5.0);
  const std::vector<double> va(sa.slopes.values().begin(), sa.slopes.values().end());
  const std::vector<double> vb(sb.slopes.values().begin(), sb.slopes.values().end());
  CHECK(*slope_metrics(neg, gt, 5.0).corr == doctest::Approx(oracle::pearson(va, vb)).epsilon(1e-12));

  const SlopeMetrics flat = slope_metrics(RasterD(8, 8, 1.0), RasterD(8, 8, 2.0), 1.0);
  CHECK_FALSE(flat.corr.has_value());
  CHECK(flat.mae_deg == 0.0);
  CHECK_THROWS_AS(slope_metrics(RasterD(8, 8), RasterD(9, 8), 1.0), Error);
}

TEST_CASE("ssim on depth") {
  const RasterD gt = wavy(64, 48);
  CHECK(*ssim_depth(gt, gt) == 1.0);

  double lo = gt[0], hi = gt[0];
  for (double v : gt.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double L = hi - lo;
  RasterD shifted = gt;
  for (double& v : shifted.values()) v += 0.1 * L;
  CHECK(*ssim_depth(shifted, gt) == doctest::Approx(ssim_oracle(shifted, gt, L)).epsilon(1e-9));

  // Invalid pixels knock out every window that touches them.
  RasterD holes = gt;
  holes(20, 30) = kNoData;
  CHECK(*ssim_depth(holes, gt) == 1.0);
  CHECK_FALSE(ssim_depth(RasterD(20, 20, 3.0), RasterD(20, 20, 3.0)).has_value());
  CHECK_FALSE(ssim_depth(RasterD(8, 8, 3.0), wavy(8, 8)).has_value());

  std::mt19937_64 g(12);
  std::uniform_real_distribution<double> u(0, 1);
  RasterD ra(512, 512), rb(512, 512);
  for (double& v : ra.values()) v = u(g);
  for (double& v : rb.values()) v = u(g);
  CHECK(std::abs(*ssim_depth(ra, rb)) < 0.1);

  const auto t = gaussian_taps(11, 1.5);
  double sum = 0;
  for (double v : t) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(t[5] > t[4]);
  CHECK(t[0] == t[10]);
}

TEST_CASE("profiles") {
  CHECK(profile_rows(100, 1) == std::vector<std::size_t>{50});
  const auto rows = profile_rows(128, 5);
  CHECK(rows.size() == 5);
  CHECK(rows[0] == 64);
  const RasterD gt = wavy(40, 30);
  const ProfileMetrics same = profile_metrics(gt, gt, 5);
  CHECK(same.mae_m == 0.0);
  CHECK(*same.corr == doctest::Approx(1.0).epsilon(1e-12));
  RasterD off = gt;
  for (double& v : off.values()) v += 5.0;
  const ProfileMetrics o = profile_metrics(off, gt, 5);
  CHECK(o.mae_m == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(*o.corr == doctest::Approx(1.0).epsilon(1e-12));
  const ProfileMetrics one = profile_metrics(off, gt, 1);
  CHECK(one.rows == std::vector<std::size_t>{15});
  CHECK_THROWS_AS(profile_metrics(RasterD(5, 5, kNoData), RasterD(5, 5, 1.0), 3), Error);
}

TEST_CASE("scale-invariant loss") {
  const auto gt = cloud(4, 50);
  CHECK(scale_invariant_loss(gt, gt) == 0.0);
  for (double s : {1e-3, 0.5, 1.0, 7.0, 1e3}) {
    std::vector<Eigen::Vector3d> p;
    for (const auto& x : gt) p.push_back(s * x);
    CHECK(scale_invariant_loss(p, gt) < 1e-12);
  }
  // One displaced point, by hand.
  auto pred = gt;
  pred[7] += Eigen::Vector3d(30, -10, 5);
  double zg = 0, zp = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    zg += gt[i].norm();
    zp += pred[i].norm();
  }
  zg /= 50.0;
  zp /= 50.0;
  double expected = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) expected += (gt[i] / zg - pred[i] / zp).norm();
  expected /= 50.0;
  CHECK(scale_invariant_loss(pred, gt) == doctest::Approx(expected).epsilon(1e-12));
  const std::vector<Eigen::Vector3d> zeros(4, Eigen::Vector3d::Zero());
  CHECK_THROWS_AS(scale_invariant_loss(zeros, zeros), Error);
}

TEST_CASE("evaluate_pair: perfect prediction") {
  const RenderedTruth rt = rendered_truth(2);
  PairPrediction pred{rt.truth.pointmap_a, rt.truth.pointmap_b, rt.truth.relative_pose};
  EvalConfig cfg;
  cfg.gsd_m = rt.gsd;
  const MetricsReport r = evaluate_pair(pred, rt.truth, cfg);
  CHECK(r.accuracy_m < 1e-6);
  CHECK(r.completeness_m < 1e-6);
  CHECK(r.chamfer_m < 1e-6);
  CHECK(*r.slope_corr == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(*r.ssim == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(*r.profile_corr == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.si_loss < 1e-12);
  CHECK(*r.rra_deg < 1e-5);
  CHECK(*r.rta_deg < 1e-5);
  CHECK_FALSE(r.rta_degenerate);

  const nlohmann::json j = r;
  for (const char* k : {"accuracy_m", "completeness_m", "chamfer_m", "accuracy_rel", "completeness_rel", "chamfer_rel",
                        "slope_corr", "slope_mae_deg", "profile_mae_m", "profile_corr", "ssim", "si_loss", "alignment"})
    CHECK(j.contains(k));
}

TEST_CASE("evaluate_pair: alignment absorbs a similarity") {
  const RenderedTruth rt = rendered_truth(1);
  for (double s : {0.5, 2.0}) {
    SimilarityTransform t;
    t.scale = s;
    t.rotation = oracle::random_rotation(static_cast<std::uint64_t>(s * 10));
    t.translation = Eigen::Vector3d(120.0, -3400.0, 77.0);
    PairPrediction pred{transformed(rt.truth.pointmap_a, t), transformed(*rt.truth.pointmap_b, t), std::nullopt};
    EvalConfig cfg;
    cfg.gsd_m = rt.gsd;
    const MetricsReport r = evaluate_pair(pred, rt.truth, cfg);
    CHECK(r.accuracy_m < 1e-6);
    CHECK(r.completeness_m < 1e-6);
    CHECK(r.profile_mae_m < 1e-6);
    CHECK(*r.ssim == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(r.alignment.scale - 1.0 / s) < 1e-9);
    CHECK_FALSE(r.rra_deg.has_value());
  }
}

TEST_CASE("evaluate_pair: elevation noise") {
  const RenderedTruth rt = rendered_truth(5);
  CHECK(rt.gsd > 110.0);
  CHECK(rt.gsd < 140.0);
  std::mt19937_64 g(21);
  std::normal_distribution<double> nd(0.0, 50.0);
  const Eigen::Vector3d up_in_view1 = rt.truth.pose_a.rotation().transpose() * Eigen::Vector3d::UnitZ();
  auto noisy = [&](PointMap pm) {
    for (std::size_t i = 0; i < pm.points.size(); ++i)
      if (pm.valid_mask[i]) pm.points[i] += nd(g) * up_in_view1;
    return pm;
  };
  PairPrediction pred{noisy(rt.truth.pointmap_a), noisy(*rt.truth.pointmap_b), rt.truth.relative_pose};
  EvalConfig cfg;
  cfg.gsd_m = rt.gsd;
  const MetricsReport r = evaluate_pair(pred, rt.truth, cfg);
  CHECK(r.chamfer_m >= 30.0);
  CHECK(r.chamfer_m <= 70.0);
  CHECK(*r.slope_corr < 1.0 - 1e-6);
  CHECK(std::isfinite(r.si_loss));
}

TEST_CASE("zero ground-truth baseline is flagged, never NaN") {
  const RenderedTruth rt = rendered_truth(0);
  PairTruth truth = rt.truth;
  truth.relative_pose = Pose(truth.relative_pose.rotation(), Eigen::Vector3d::Zero());
  PairPrediction pred{truth.pointmap_a, std::nullopt, truth.relative_pose};
  EvalConfig cfg;
  cfg.gsd_m = rt.gsd;
  const MetricsReport r = evaluate_pair(pred, truth, cfg);
  CHECK(r.rta_degenerate);
  CHECK_FALSE(r.rta_deg.has_value());
  const std::string dumped = nlohmann::json(r).dump();
  CHECK(dumped.find("NaN") == std::string::npos);
  CHECK(dumped.find("null") == std::string::npos);
  CHECK(dumped.find("degenerate") != std::string::npos);
}
