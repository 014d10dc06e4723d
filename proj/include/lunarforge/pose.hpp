#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "lunarforge/camera.hpp"
#include "lunarforge/renderer.hpp"
#include "lunarforge/rng.hpp"

namespace lunarforge {

struct RansacParams {
  std::size_t iterations = 2000;
  double inlier_threshold = 1.0;  // pixels for essential/PnP, meters for alignment
  std::uint64_t seed = 0;
  double confidence = 0.999;  // adaptive early stop
};

struct EssentialEstimate {
  Eigen::Matrix3d E = Eigen::Matrix3d::Zero();  // x2^T E x1 = 0 on normalized image points
  std::vector<std::size_t> inliers;
  Pose relative_pose;  // camera 2 in camera 1's frame, unit translation
  // Set when the matches are explained by a rotation alone (no usable
  // parallax). E is then zero and relative_pose holds the rotation with zero
  // translation.
  bool degenerate = false;
  double rotation_only_residual_px = 0.0;  // median residual of the rotation-only fit
};

/// Normalized 8-point in RANSAC with Sampson scoring, refit on inliers,
/// projection to the essential manifold, and a cheirality vote over
/// midpoint-triangulated inliers.
EssentialEstimate estimate_essential(const std::vector<Correspondence>& matches, const Intrinsics& intr1,
                                     const Intrinsics& intr2, const RansacParams& ransac = {});

// Sampson distance of a match, in the same units as the normalized coordinates.
double sampson_distance(const Eigen::Matrix3d& E, const Eigen::Vector3d& x1, const Eigen::Vector3d& x2);

// The four (R, t) factorizations of an essential matrix for X2 = R X1 + t.
std::vector<std::pair<Eigen::Matrix3d, Eigen::Vector3d>> decompose_essential(const Eigen::Matrix3d& E);

struct Match2D3D {
  double u = 0.0;
  double v = 0.0;
  Eigen::Vector3d point;
};

struct PnpEstimate {
  Pose pose;  // camera-to-world
  std::vector<std::size_t> inliers;
  double rms_reprojection_px = 0.0;
};

/// DLT on 6-point samples in RANSAC, then Levenberg-Marquardt on the
/// reprojection error of the inliers.
PnpEstimate solve_pnp(const std::vector<Match2D3D>& matches, const Intrinsics& intr, const RansacParams& ransac = {});

// Rotation angle of R_gt^T R_pred, degrees.
double rra(const Eigen::Matrix3d& r_gt, const Eigen::Matrix3d& r_pred);
// Angle between translation directions, degrees. Throws degenerate on a zero vector.
double rta(const Eigen::Vector3d& t_gt, const Eigen::Vector3d& t_pred, bool sign_insensitive = false);

// Fraction of errors strictly below each threshold.
std::vector<double> pose_accuracy_table(const std::vector<double>& errors_deg, const std::vector<double>& thresholds_deg);

struct SimilarityTransform {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return scale * (rotation * p) + translation; }
};

/// Least-squares similarity with det R = +1. Throws degenerate for collinear input.
SimilarityTransform umeyama(const std::vector<Eigen::Vector3d>& src, const std::vector<Eigen::Vector3d>& dst);

struct AlignmentResult {
  SimilarityTransform transform;
  std::vector<unsigned char> inlier_mask;
  std::size_t inlier_count = 0;
};

/// RANSAC over 3-point umeyama hypotheses mapping pred onto gt, threshold in
/// meters, final refit on the inliers.
AlignmentResult ransac_align(const std::vector<Eigen::Vector3d>& pred, const std::vector<Eigen::Vector3d>& gt,
                             const RansacParams& ransac);

// Number of RANSAC draws needed for `confidence` given the inlier ratio.
std::size_t ransac_trials_needed(double inlier_ratio, std::size_t sample_size, double confidence);

// k distinct indices in [0, n), reproducible from rng.
std::vector<std::size_t> sample_distinct(Rng& rng, std::size_t n, std::size_t k);

}  // namespace lunarforge
