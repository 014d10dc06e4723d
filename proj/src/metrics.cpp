#include "lunarforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lunarforge/error.hpp"
#include "lunarforge/io.hpp"
#include "lunarforge/nn_index.hpp"
#include "lunarforge/parallel.hpp"
#include "lunarforge/simd/kernels.hpp"
#include "lunarforge/terrain.hpp"

namespace lunarforge {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_nn_distance(const std::vector<Eigen::Vector3d>& queries, const NearestIndex& index, std::size_t workers) {
  std::vector<double> d(queries.size());
  constexpr std::size_t kChunk = 1024;
  const std::size_t chunks = (queries.size() + kChunk - 1) / kChunk;
  parallel_for(chunks, workers, [&](std::size_t c) {
    const std::size_t end = std::min(queries.size(), (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) d[i] = index.nearest(queries[i]).distance;
  });
  double s = 0.0;
  for (double v : d) s += v;
  return s / static_cast<double>(d.size());
}

void require_nonempty(const std::vector<Eigen::Vector3d>& a, const std::vector<Eigen::Vector3d>& b) {
  if (a.empty() || b.empty()) throw Error(Errc::insufficient_data, "point clouds must be non-empty");
}
}  // namespace

ChamferResult accuracy_completeness(const std::vector<Eigen::Vector3d>& pred, const std::vector<Eigen::Vector3d>& gt,
                                    std::size_t workers) {
  require_nonempty(pred, gt);
  const NearestIndex gt_index(gt), pred_index(pred);
  ChamferResult r;
  r.accuracy_m = mean_nn_distance(pred, gt_index, workers);
  r.completeness_m = mean_nn_distance(gt, pred_index, workers);
  r.chamfer_m = 0.5 * (r.accuracy_m + r.completeness_m);
  return r;
}

ChamferResult accuracy_completeness_brute(const std::vector<Eigen::Vector3d>& pred,
                                          const std::vector<Eigen::Vector3d>& gt) {
  require_nonempty(pred, gt);
  auto mean_nn = [](const std::vector<Eigen::Vector3d>& q, const std::vector<Eigen::Vector3d>& ref) {
    double s = 0.0;
    for (const auto& p : q) s += brute_force_nearest(ref, p).distance;
    return s / static_cast<double>(q.size());
  };
  ChamferResult r;
  r.accuracy_m = mean_nn(pred, gt);
  r.completeness_m = mean_nn(gt, pred);
  r.chamfer_m = 0.5 * (r.accuracy_m + r.completeness_m);
  return r;
}

double scene_scale(const std::vector<Eigen::Vector3d>& gt) {
  if (gt.empty()) throw Error(Errc::insufficient_data, "empty cloud has no scale");
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (const auto& p : gt) c += p;
  c /= static_cast<double>(gt.size());
  double s = 0.0;
  for (const auto& p : gt) s += (p - c).norm();
  return s / static_cast<double>(gt.size());
}

double relative_error(double metric_m, double scene_scale_m) {
  if (!(scene_scale_m > 0.0)) throw Error(Errc::degenerate, "scene scale must be positive");
  return metric_m / scene_scale_m;
}

std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error(Errc::dimension_mismatch, "pearson inputs differ in length");
  if (a.size() < 2) return std::nullopt;
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

SlopeMetrics slope_metrics(const RasterD& pred_elev, const RasterD& gt_elev, double spacing) {
  if (!pred_elev.same_shape(gt_elev)) throw Error(Errc::dimension_mismatch, "elevation rasters differ in shape");
  const SlopeMap sp = slope_map(pred_elev, spacing);
  const SlopeMap sg = slope_map(gt_elev, spacing);
  std::vector<double> a, b;
  double abs_sum = 0.0;
  for (std::size_t i = 0; i < sp.slopes.size(); ++i) {
    const double p = sp.slopes[i], g = sg.slopes[i];
    if (!std::isfinite(p) || !std::isfinite(g)) continue;
    a.push_back(p);
    b.push_back(g);
    abs_sum += std::abs(p - g);
  }
  if (a.size() < 2) throw Error(Errc::insufficient_data, "fewer than 2 shared valid slope cells");
  SlopeMetrics m;
  m.cells = a.size();
  m.mae_deg = abs_sum / static_cast<double>(a.size());
  m.corr = pearson(a, b);
  return m;
}

std::vector<double> gaussian_taps(std::size_t size, double sigma) {
  if (size == 0 || !(sigma > 0.0)) throw Error(Errc::invalid_argument, "window size and sigma must be positive");
  std::vector<double> w(size);
  const double c = 0.5 * static_cast<double>(size - 1);
  double s = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double x = static_cast<double>(i) - c;
    w[i] = std::exp(-x * x / (2.0 * sigma * sigma));
    s += w[i];
  }
  for (double& v : w) v /= s;
  return w;
}

std::optional<double> ssim_depth(const RasterD& pred, const RasterD& gt, const SsimConfig& cfg) {
  if (!pred.same_shape(gt)) throw Error(Errc::dimension_mismatch, "depth rasters differ in shape");
  const std::size_t w = gt.width(), h = gt.height(), win = cfg.window;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  bool any = false;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!std::isfinite(gt[i]) || !std::isfinite(pred[i])) continue;
    lo = std::min(lo, gt[i]);
    hi = std::max(hi, gt[i]);
    any = true;
  }
  if (!any) throw Error(Errc::insufficient_data, "no shared valid depth pixels");
  const double range = hi - lo;
  if (!(range > 0.0) || w < win || h < win) return std::nullopt;

  const std::size_t n = w * h;
  std::vector<double> x(n, 0.0), y(n, 0.0), xx(n), yy(n), xy(n);
  // Invalid-pixel counts as a summed-area table for the full-window test.
  std::vector<std::size_t> sat((w + 1) * (h + 1), 0);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t i = r * w + c;
      const bool ok = std::isfinite(gt[i]) && std::isfinite(pred[i]);
      if (ok) {
        x[i] = pred[i];
        y[i] = gt[i];
      }
      sat[(r + 1) * (w + 1) + c + 1] = sat[r * (w + 1) + c + 1] + sat[(r + 1) * (w + 1) + c] - sat[r * (w + 1) + c] + (ok ? 0 : 1);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const std::vector<double> taps = gaussian_taps(win, cfg.sigma);
  const std::size_t ow = w - win + 1, oh = h - win + 1;
  std::vector<double> tmp(ow * h);
  auto filter = [&](const std::vector<double>& in) {
    std::vector<double> out(ow * oh);
    simd::convolve_rows(in.data(), w, h, taps, tmp.data());
    simd::convolve_cols(tmp.data(), ow, h, taps, out.data());
    return out;
  };
  const auto mx = filter(x), my = filter(y), exx = filter(xx), eyy = filter(yy), exy = filter(xy);
  const double c1 = (cfg.k1 * range) * (cfg.k1 * range);
  const double c2 = (cfg.k2 * range) * (cfg.k2 * range);
  std::vector<double> s(ow * oh);
  simd::ssim_combine(mx.data(), my.data(), exx.data(), eyy.data(), exy.data(), c1, c2, s.data(), s.size());

  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < oh; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      const std::size_t bad = sat[(r + win) * (w + 1) + c + win] - sat[r * (w + 1) + c + win] -
                              sat[(r + win) * (w + 1) + c] + sat[r * (w + 1) + c];
      if (bad != 0) continue;
      sum += s[r * ow + c];
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

std::vector<std::size_t> profile_rows(std::size_t height, std::size_t n_profiles) {
  if (n_profiles == 0) throw Error(Errc::invalid_argument, "n_profiles must be at least 1");
  if (height == 0) throw Error(Errc::invalid_argument, "empty raster");
  const std::size_t center = height / 2;
  const double spacing = static_cast<double>(height) / static_cast<double>(n_profiles + 1);
  std::vector<std::size_t> rows{center};
  for (std::size_t k = 1; rows.size() < n_profiles; ++k) {
    const auto off = static_cast<std::ptrdiff_t>(std::llround(static_cast<double>(k) * spacing));
    bool added = false;
    for (std::ptrdiff_t r : {static_cast<std::ptrdiff_t>(center) + off, static_cast<std::ptrdiff_t>(center) - off}) {
      if (rows.size() >= n_profiles) break;
      if (r < 0 || r >= static_cast<std::ptrdiff_t>(height)) continue;
      if (std::find(rows.begin(), rows.end(), static_cast<std::size_t>(r)) != rows.end()) continue;
      rows.push_back(static_cast<std::size_t>(r));
      added = true;
    }
    if (!added && static_cast<double>(k) * spacing > static_cast<double>(height)) break;
  }
  return rows;
}

ProfileMetrics profile_metrics(const RasterD& pred, const RasterD& gt, std::size_t n_profiles) {
  if (!pred.same_shape(gt)) throw Error(Errc::dimension_mismatch, "depth rasters differ in shape");
  ProfileMetrics m;
  double mae_sum = 0.0, corr_sum = 0.0;
  std::size_t used = 0, corr_used = 0;
  for (std::size_t r : profile_rows(gt.height(), n_profiles)) {
    std::vector<double> a, b;
    double abs_sum = 0.0;
    for (std::size_t c = 0; c < gt.width(); ++c) {
      const double p = pred(r, c), g = gt(r, c);
      if (!std::isfinite(p) || !std::isfinite(g)) continue;
      a.push_back(p);
      b.push_back(g);
      abs_sum += std::abs(p - g);
    }
    if (a.size() < 2) continue;
    m.rows.push_back(r);
    mae_sum += abs_sum / static_cast<double>(a.size());
    ++used;
    if (const auto c = pearson(a, b)) {
      corr_sum += *c;
      ++corr_used;
    }
  }
  if (used == 0) throw Error(Errc::insufficient_data, "every profile has fewer than 2 valid pixels");
  m.mae_m = mae_sum / static_cast<double>(used);
  if (corr_used > 0) m.corr = corr_sum / static_cast<double>(corr_used);
  return m;
}

double scale_invariant_loss(const std::vector<Eigen::Vector3d>& pred, const std::vector<Eigen::Vector3d>& gt) {
  if (pred.size() != gt.size()) throw Error(Errc::dimension_mismatch, "point lists differ in length");
  if (pred.empty()) throw Error(Errc::insufficient_data, "no valid points");
  double zg = 0.0, zp = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    zg += gt[i].norm();
    zp += pred[i].norm();
  }
  const double n = static_cast<double>(gt.size());
  zg /= n;
  zp /= n;
  if (!(zg > 0.0) || !(zp > 0.0)) throw Error(Errc::degenerate, "zero normalizer: all points at the origin");
  double s = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) s += (gt[i] / zg - pred[i] / zp).norm();
  return s / n;
}

double scale_invariant_loss(const PointMap& pred, const PointMap& gt) {
  if (pred.width != gt.width || pred.height != gt.height)
    throw Error(Errc::dimension_mismatch, "pointmaps differ in shape");
  std::vector<Eigen::Vector3d> a, b;
  for (std::size_t i = 0; i < gt.points.size(); ++i) {
    if (!pred.valid_mask[i] || !gt.valid_mask[i]) continue;
    a.push_back(pred.points[i]);
    b.push_back(gt.points[i]);
  }
  return scale_invariant_loss(a, b);
}

namespace {

void check_shapes(const PointMap& a, const PointMap& b) {
  if (a.width != b.width || a.height != b.height) throw Error(Errc::dimension_mismatch, "pointmaps differ in shape");
}

}  // namespace

MetricsReport evaluate_pair(const PairPrediction& pred, const PairTruth& gt, const EvalConfig& cfg) {
  check_shapes(pred.pointmap_a, gt.pointmap_a);
  std::vector<const PointMap*> pm_pred{&pred.pointmap_a}, pm_gt{&gt.pointmap_a};
  if (pred.pointmap_b && gt.pointmap_b) {
    check_shapes(*pred.pointmap_b, *gt.pointmap_b);
    pm_pred.push_back(&*pred.pointmap_b);
    pm_gt.push_back(&*gt.pointmap_b);
  }

  std::vector<Eigen::Vector3d> pair_pred, pair_gt, cloud_pred, cloud_gt;
  for (std::size_t v = 0; v < pm_pred.size(); ++v) {
    const PointMap& p = *pm_pred[v];
    const PointMap& g = *pm_gt[v];
    for (std::size_t i = 0; i < g.points.size(); ++i) {
      if (p.valid_mask[i]) cloud_pred.push_back(p.points[i]);
      if (g.valid_mask[i]) cloud_gt.push_back(g.points[i]);
      if (p.valid_mask[i] && g.valid_mask[i]) {
        pair_pred.push_back(p.points[i]);
        pair_gt.push_back(g.points[i]);
      }
    }
  }
  if (pair_pred.size() < 3) throw Error(Errc::insufficient_data, "fewer than 3 shared valid pixels");

  MetricsReport r;
  r.si_loss = scale_invariant_loss(pair_pred, pair_gt);

  if (cfg.align) {
    RansacParams rp = cfg.ransac;
    rp.inlier_threshold = cfg.align_threshold_m > 0.0 ? cfg.align_threshold_m : 3.0 * cfg.gsd_m;
    const AlignmentResult al = ransac_align(pair_pred, pair_gt, rp);
    r.alignment = al.transform;
    r.alignment_inliers = al.inlier_count;
  } else {
    r.alignment_inliers = pair_pred.size();
  }
  for (auto& p : cloud_pred) p = r.alignment.apply(p);

  const ChamferResult ch = accuracy_completeness(cloud_pred, cloud_gt, cfg.workers);
  r.accuracy_m = ch.accuracy_m;
  r.completeness_m = ch.completeness_m;
  r.chamfer_m = ch.chamfer_m;
  const double scale = scene_scale(cloud_gt);
  r.accuracy_rel = relative_error(r.accuracy_m, scale);
  r.completeness_rel = relative_error(r.completeness_m, scale);
  r.chamfer_rel = relative_error(r.chamfer_m, scale);

  // View a rasters: world elevation and ray depth from the aligned points.
  const PointMap& pa = pred.pointmap_a;
  const PointMap& ga = gt.pointmap_a;
  RasterD elev_p(ga.width, ga.height, kNaN), elev_g(ga.width, ga.height, kNaN);
  RasterD depth_p(ga.width, ga.height, kNaN), depth_g(ga.width, ga.height, kNaN);
  const Pose& ref = gt.pose_a;
  for (std::size_t i = 0; i < ga.points.size(); ++i) {
    if (ga.valid_mask[i]) {
      elev_g[i] = ref.to_world(ga.points[i]).z();
      depth_g[i] = ga.points[i].norm();
    }
    if (pa.valid_mask[i]) {
      const Eigen::Vector3d q = r.alignment.apply(pa.points[i]);
      elev_p[i] = ref.to_world(q).z();
      depth_p[i] = q.norm();
    }
  }
  const SlopeMetrics sm = slope_metrics(elev_p, elev_g, cfg.gsd_m);
  r.slope_corr = sm.corr;
  r.slope_mae_deg = sm.mae_deg;
  r.ssim = ssim_depth(depth_p, depth_g);
  const ProfileMetrics pm = profile_metrics(depth_p, depth_g, cfg.n_profiles);
  r.profile_mae_m = pm.mae_m;
  r.profile_corr = pm.corr;

  if (pred.relative_pose) {
    r.rra_deg = rra(gt.relative_pose.rotation(), pred.relative_pose->rotation());
    try {
      r.rta_deg = rta(gt.relative_pose.translation(), pred.relative_pose->translation());
    } catch (const Error& e) {
      if (e.code() != Errc::degenerate) throw;
      r.rta_degenerate = true;
    }
  }
  return r;
}

void to_json(nlohmann::json& j, const SimilarityTransform& t) {
  std::vector<double> rot;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(t.rotation(r, c));
  j = {{"scale", t.scale}, {"rotation", rot}, {"translation", {t.translation.x(), t.translation.y(), t.translation.z()}}};
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? io::number_or_flag(*v) : nlohmann::json("degenerate"); };
  j = {{"accuracy_m", io::number_or_flag(r.accuracy_m)},
       {"completeness_m", io::number_or_flag(r.completeness_m)},
       {"chamfer_m", io::number_or_flag(r.chamfer_m)},
       {"accuracy_rel", io::number_or_flag(r.accuracy_rel)},
       {"completeness_rel", io::number_or_flag(r.completeness_rel)},
       {"chamfer_rel", io::number_or_flag(r.chamfer_rel)},
       {"slope_corr", opt(r.slope_corr)},
       {"slope_mae_deg", io::number_or_flag(r.slope_mae_deg)},
       {"profile_mae_m", io::number_or_flag(r.profile_mae_m)},
       {"profile_corr", opt(r.profile_corr)},
       {"ssim", opt(r.ssim)},
       {"si_loss", io::number_or_flag(r.si_loss)},
       {"alignment", r.alignment},
       {"alignment_inliers", r.alignment_inliers}};
  if (r.rra_deg) j["rra_deg"] = io::number_or_flag(*r.rra_deg);
  if (r.rra_deg || r.rta_degenerate) j["rta_deg"] = r.rta_degenerate ? nlohmann::json("degenerate") : opt(r.rta_deg);
}

}  // namespace lunarforge
