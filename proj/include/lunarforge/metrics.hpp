#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "lunarforge/camera.hpp"
#include "lunarforge/pose.hpp"
#include "lunarforge/raster.hpp"
#include "lunarforge/renderer.hpp"

namespace lunarforge {

struct ChamferResult {
  double accuracy_m = 0.0;      // mean pred -> nearest gt
  double completeness_m = 0.0;  // mean gt -> nearest pred
  double chamfer_m = 0.0;       // mean of the two
};

ChamferResult accuracy_completeness(const std::vector<Eigen::Vector3d>& pred, const std::vector<Eigen::Vector3d>& gt,
                                    std::size_t workers = 1);
// Same, by exhaustive search. Reference for tests.
ChamferResult accuracy_completeness_brute(const std::vector<Eigen::Vector3d>& pred,
                                          const std::vector<Eigen::Vector3d>& gt);

// Mean distance of the points to their centroid.
double scene_scale(const std::vector<Eigen::Vector3d>& gt);
double relative_error(double metric_m, double scene_scale_m);

// Pearson correlation; nullopt when either side has zero variance or n < 2.
std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b);

struct SlopeMetrics {
  std::optional<double> corr;  // nullopt: zero-variance slope field
  double mae_deg = 0.0;
  std::size_t cells = 0;
};

SlopeMetrics slope_metrics(const RasterD& pred_elev, const RasterD& gt_elev, double spacing);

struct SsimConfig {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

// 1D Gaussian taps normalized to sum 1.
std::vector<double> gaussian_taps(std::size_t size, double sigma);

/// Mean SSIM over windows that lie entirely inside the shared valid mask.
/// nullopt when the GT depth range is zero or no window is fully valid.
std::optional<double> ssim_depth(const RasterD& pred, const RasterD& gt, const SsimConfig& cfg = {});

struct ProfileMetrics {
  double mae_m = 0.0;
  std::optional<double> corr;  // mean over profiles with a defined correlation
  std::vector<std::size_t> rows;
};

// Central row first, then alternating below/above at spacing height/(n+1).
std::vector<std::size_t> profile_rows(std::size_t height, std::size_t n_profiles);
ProfileMetrics profile_metrics(const RasterD& pred, const RasterD& gt, std::size_t n_profiles = 5);

double scale_invariant_loss(const std::vector<Eigen::Vector3d>& pred, const std::vector<Eigen::Vector3d>& gt);
// Over pixels valid in both maps.
double scale_invariant_loss(const PointMap& pred, const PointMap& gt);

struct EvalConfig {
  double align_threshold_m = 0.0;  // <= 0: 3 * gsd_m
  double gsd_m = 1.0;              // elevation raster spacing and default threshold base
  std::size_t n_profiles = 5;
  RansacParams ransac;
  bool align = true;
  std::size_t workers = 1;
};

struct PairTruth {
  PointMap pointmap_a;  // view1 frame
  std::optional<PointMap> pointmap_b;
  Pose pose_a;  // camera a to world
  Pose relative_pose;
};

struct PairPrediction {
  PointMap pointmap_a;
  std::optional<PointMap> pointmap_b;
  std::optional<Pose> relative_pose;
};

struct MetricsReport {
  double accuracy_m = 0.0, completeness_m = 0.0, chamfer_m = 0.0;
  double accuracy_rel = 0.0, completeness_rel = 0.0, chamfer_rel = 0.0;
  std::optional<double> slope_corr;
  double slope_mae_deg = 0.0;
  double profile_mae_m = 0.0;
  std::optional<double> profile_corr;
  std::optional<double> ssim;
  double si_loss = 0.0;
  SimilarityTransform alignment;
  std::size_t alignment_inliers = 0;
  std::optional<double> rra_deg;
  std::optional<double> rta_deg;
  bool rta_degenerate = false;  // zero ground-truth baseline
};

MetricsReport evaluate_pair(const PairPrediction& pred, const PairTruth& gt, const EvalConfig& cfg);

// Degenerate or absent values become the string "degenerate".
void to_json(nlohmann::json& j, const MetricsReport& r);
void to_json(nlohmann::json& j, const SimilarityTransform& t);

}  // namespace lunarforge
