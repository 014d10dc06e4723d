#include <algorithm>
#include <cmath>
#include <optional>

#include <Eigen/Dense>

#include "lunarforge/error.hpp"
#include "lunarforge/pose.hpp"

namespace lunarforge {

SimilarityTransform umeyama(const std::vector<Eigen::Vector3d>& src, const std::vector<Eigen::Vector3d>& dst) {
  if (src.size() != dst.size()) throw Error(Errc::dimension_mismatch, "umeyama needs paired point lists");
  if (src.size() < 3) throw Error(Errc::insufficient_data, "umeyama needs at least 3 pairs");
  const double n = static_cast<double>(src.size());
  Eigen::Vector3d mu_s = Eigen::Vector3d::Zero(), mu_d = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    mu_s += src[i];
    mu_d += dst[i];
  }
  mu_s /= n;
  mu_d /= n;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  double var_s = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Eigen::Vector3d a = src[i] - mu_s;
    cov += (dst[i] - mu_d) * a.transpose();
    var_s += a.squaredNorm();
  }
  cov /= n;
  var_s /= n;

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d d = svd.singularValues();
  if (!(var_s > 0.0) || !(d(0) > 0.0) || d(1) <= 1e-12 * d(0))
    throw Error(Errc::degenerate, "point set is collinear or degenerate");
  Eigen::Vector3d s(1.0, 1.0, 1.0);
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) s(2) = -1.0;

  SimilarityTransform t;
  t.rotation = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  t.scale = d.dot(s) / var_s;
  t.translation = mu_d - t.scale * (t.rotation * mu_s);
  return t;
}

namespace {

std::size_t count_inliers(const SimilarityTransform& t, const std::vector<Eigen::Vector3d>& pred,
                          const std::vector<Eigen::Vector3d>& gt, const std::vector<std::size_t>& subset,
                          double thresh_sq) {
  std::size_t n = 0;
  for (std::size_t i : subset)
    if ((t.apply(pred[i]) - gt[i]).squaredNorm() <= thresh_sq) ++n;
  return n;
}

}  // namespace

AlignmentResult ransac_align(const std::vector<Eigen::Vector3d>& pred, const std::vector<Eigen::Vector3d>& gt,
                             const RansacParams& ransac) {
  if (pred.size() != gt.size()) throw Error(Errc::dimension_mismatch, "clouds must be paired by index");
  if (pred.size() < 3) throw Error(Errc::insufficient_data, "alignment needs at least 3 pairs");
  if (!(ransac.inlier_threshold > 0.0)) throw Error(Errc::invalid_argument, "inlier threshold must be positive");
  const std::size_t n = pred.size();
  const double thresh_sq = ransac.inlier_threshold * ransac.inlier_threshold;

  // Hypotheses are scored on a fixed subsample to bound the cost on dense clouds.
  constexpr std::size_t kScoreSample = 4096;
  std::vector<std::size_t> score_set(std::min(n, kScoreSample));
  for (std::size_t k = 0; k < score_set.size(); ++k) score_set[k] = k * n / score_set.size();

  Rng rng(hash_combine(ransac.seed, 0xA11Full));
  std::size_t best = 0;
  std::optional<SimilarityTransform> best_t;
  std::size_t needed = ransac.iterations;
  for (std::size_t it = 0; it < std::min(needed, ransac.iterations); ++it) {
    const auto idx = sample_distinct(rng, n, 3);
    SimilarityTransform t;
    try {
      t = umeyama({pred[idx[0]], pred[idx[1]], pred[idx[2]]}, {gt[idx[0]], gt[idx[1]], gt[idx[2]]});
    } catch (const Error&) {
      continue;
    }
    const std::size_t c = count_inliers(t, pred, gt, score_set, thresh_sq);
    if (c > best) {
      best = c;
      best_t = t;
      needed = ransac_trials_needed(static_cast<double>(c) / static_cast<double>(score_set.size()), 3,
                                    ransac.confidence);
    }
  }
  if (!best_t || best < 3) throw Error(Errc::no_consensus, "no similarity hypothesis gathered 3 inliers");

  AlignmentResult out;
  SimilarityTransform current = *best_t;
  for (int round = 0; round < 3; ++round) {
    std::vector<Eigen::Vector3d> src, dst;
    std::vector<unsigned char> mask(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if ((current.apply(pred[i]) - gt[i]).squaredNorm() <= thresh_sq) {
        mask[i] = 1;
        src.push_back(pred[i]);
        dst.push_back(gt[i]);
      }
    }
    if (src.size() < 3) break;
    SimilarityTransform refit;
    try {
      refit = umeyama(src, dst);
    } catch (const Error&) {
      break;
    }
    out.transform = refit;
    out.inlier_mask = std::move(mask);
    out.inlier_count = src.size();
    if (round > 0 && refit.scale == current.scale && refit.rotation == current.rotation &&
        refit.translation == current.translation)
      break;
    current = refit;
  }
  if (out.inlier_mask.empty()) throw Error(Errc::no_consensus, "refit on inliers failed");
  // Report the inlier set of the returned transform.
  out.inlier_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out.inlier_mask[i] = (out.transform.apply(pred[i]) - gt[i]).squaredNorm() <= thresh_sq;
    out.inlier_count += out.inlier_mask[i];
  }
  return out;
}

}  // namespace lunarforge
