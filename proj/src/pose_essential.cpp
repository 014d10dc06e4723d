#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "lunarforge/error.hpp"
#include "lunarforge/pose.hpp"

namespace lunarforge {

namespace {

struct Normalizer {
  Eigen::Matrix3d T = Eigen::Matrix3d::Identity();
};

Normalizer hartley(const std::vector<Eigen::Vector3d>& pts, const std::vector<std::size_t>& idx) {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (std::size_t i : idx) mean += pts[i].head<2>();
  mean /= static_cast<double>(idx.size());
  double dist = 0.0;
  for (std::size_t i : idx) dist += (pts[i].head<2>() - mean).norm();
  dist /= static_cast<double>(idx.size());
  const double s = dist > 0.0 ? std::sqrt(2.0) / dist : 1.0;
  Normalizer n;
  n.T << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
  return n;
}

Eigen::Matrix3d to_essential_manifold(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * Eigen::Vector3d(1.0, 1.0, 0.0).asDiagonal() * svd.matrixV().transpose();
}

// Linear 8-point solve over `idx` (at least 8), projected to the manifold.
std::optional<Eigen::Matrix3d> eight_point(const std::vector<Eigen::Vector3d>& x1, const std::vector<Eigen::Vector3d>& x2,
                                           const std::vector<std::size_t>& idx) {
  const Normalizer n1 = hartley(x1, idx), n2 = hartley(x2, idx);
  Eigen::MatrixXd a(std::max<std::size_t>(idx.size(), 9), 9);
  a.setZero();
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Eigen::Vector3d p = n1.T * x1[idx[k]];
    const Eigen::Vector3d q = n2.T * x2[idx[k]];
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) a(static_cast<Eigen::Index>(k), 3 * r + c) = q(r) * p(c);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd f = svd.matrixV().col(8);
  Eigen::Matrix3d fn;
  fn << f(0), f(1), f(2), f(3), f(4), f(5), f(6), f(7), f(8);
  const Eigen::Matrix3d e = n2.T.transpose() * fn * n1.T;
  if (!e.allFinite() || e.norm() == 0.0) return std::nullopt;
  return to_essential_manifold(e / e.norm());
}

// Rays p1 from camera 1 and p2 from camera 2 with X2 = R X1 + t. Returns the
// ray parameters of the midpoint triangulation (along unit bearings).
std::pair<double, double> midpoint_depths(const Eigen::Vector3d& b1, const Eigen::Vector3d& b2, const Eigen::Matrix3d& r,
                                          const Eigen::Vector3d& t) {
  // Camera 2 center and ray in camera 1's frame.
  const Eigen::Vector3d c2 = -r.transpose() * t;
  const Eigen::Vector3d d2 = r.transpose() * b2;
  Eigen::Matrix<double, 3, 2> m;
  m.col(0) = b1;
  m.col(1) = -d2;
  const Eigen::Vector2d lam = (m.transpose() * m).ldlt().solve(m.transpose() * c2);
  return {lam(0), lam(1)};
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

}  // namespace

double sampson_distance(const Eigen::Matrix3d& E, const Eigen::Vector3d& x1, const Eigen::Vector3d& x2) {
  const Eigen::Vector3d ex1 = E * x1;
  const Eigen::Vector3d etx2 = E.transpose() * x2;
  const double num = x2.dot(ex1);
  const double den = ex1(0) * ex1(0) + ex1(1) * ex1(1) + etx2(0) * etx2(0) + etx2(1) * etx2(1);
  if (!(den > 0.0)) return std::abs(num) > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return std::abs(num) / std::sqrt(den);
}

std::vector<std::pair<Eigen::Matrix3d, Eigen::Vector3d>> decompose_essential(const Eigen::Matrix3d& E) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU(), v = svd.matrixV();
  if (u.determinant() < 0) u = -u;
  if (v.determinant() < 0) v = -v;
  Eigen::Matrix3d w;
  w << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Eigen::Matrix3d r1 = u * w * v.transpose();
  const Eigen::Matrix3d r2 = u * w.transpose() * v.transpose();
  const Eigen::Vector3d t = u.col(2);
  return {{r1, t}, {r1, -t}, {r2, t}, {r2, -t}};
}

EssentialEstimate estimate_essential(const std::vector<Correspondence>& matches, const Intrinsics& intr1,
                                     const Intrinsics& intr2, const RansacParams& ransac) {
  const std::size_t n = matches.size();
  if (n < 8) throw Error(Errc::insufficient_data, "the essential matrix needs at least 8 matches");
  if (!(ransac.inlier_threshold > 0.0)) throw Error(Errc::invalid_argument, "inlier threshold must be positive");

  std::vector<Eigen::Vector3d> x1(n), x2(n), b1(n), b2(n);
  for (std::size_t i = 0; i < n; ++i) {
    b1[i] = camera_direction(intr1, matches[i].u1, matches[i].v1);
    b2[i] = camera_direction(intr2, matches[i].u2, matches[i].v2);
    x1[i] = b1[i] / b1[i].z();
    x2[i] = b2[i] / b2[i].z();
  }
  const double focal = 0.5 * (intr1.focal_px + intr2.focal_px);
  const double thresh = ransac.inlier_threshold / focal;

  EssentialEstimate out;

  // Rotation-only fit b2 ~ Rr b1 (Kabsch on bearings). A tiny median residual
  // means there is no parallax to recover a translation from.
  {
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < n; ++i) h += b2[i] * b1[i].transpose();
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Vector3d s(1.0, 1.0, 1.0);
    if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) s(2) = -1.0;
    const Eigen::Matrix3d rr = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
    std::vector<double> res(n);
    for (std::size_t i = 0; i < n; ++i) res[i] = (b2[i] - rr * b1[i]).norm() * focal;
    out.rotation_only_residual_px = median(res);
    if (out.rotation_only_residual_px < 0.05 * ransac.inlier_threshold) {
      out.degenerate = true;
      for (std::size_t i = 0; i < n; ++i)
        if (res[i] <= ransac.inlier_threshold) out.inliers.push_back(i);
      // b2 = Rr b1 means camera 2 sits in camera 1's frame with rotation Rr^T.
      out.relative_pose = Pose::orthonormalized(rr.transpose(), Eigen::Vector3d::Zero());
      return out;
    }
  }

  Rng rng(hash_combine(ransac.seed, 0xE55Eull));
  std::size_t best = 0;
  Eigen::Matrix3d best_e = Eigen::Matrix3d::Zero();
  std::size_t needed = ransac.iterations;
  for (std::size_t it = 0; it < std::min(needed, ransac.iterations); ++it) {
    const auto idx = sample_distinct(rng, n, 8);
    const auto e = eight_point(x1, x2, idx);
    if (!e) continue;
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (sampson_distance(*e, x1[i], x2[i]) <= thresh) ++c;
    if (c > best) {
      best = c;
      best_e = *e;
      needed = ransac_trials_needed(static_cast<double>(c) / static_cast<double>(n), 8, ransac.confidence);
    }
  }
  if (best < 8) throw Error(Errc::no_consensus, "no essential-matrix hypothesis reached 8 inliers");

  // Refit on inliers until the inlier set stops changing.
  std::vector<std::size_t> inliers;
  for (int round = 0; round < 4; ++round) {
    std::vector<std::size_t> next;
    for (std::size_t i = 0; i < n; ++i)
      if (sampson_distance(best_e, x1[i], x2[i]) <= thresh) next.push_back(i);
    if (next.size() < 8 || next == inliers) break;
    inliers = std::move(next);
    const auto e = eight_point(x1, x2, inliers);
    if (!e) break;
    best_e = *e;
  }
  if (inliers.size() < 8) throw Error(Errc::no_consensus, "inlier refit collapsed below 8 matches");
  out.inliers.clear();
  for (std::size_t i = 0; i < n; ++i)
    if (sampson_distance(best_e, x1[i], x2[i]) <= thresh) out.inliers.push_back(i);
  out.E = best_e;

  // Cheirality: most inliers in front of both cameras.
  const auto candidates = decompose_essential(best_e);
  std::size_t best_front = 0;
  std::size_t best_k = 0;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const auto& [r, t] = candidates[k];
    std::size_t front = 0;
    for (std::size_t i : out.inliers) {
      const auto [l1, l2] = midpoint_depths(b1[i], b2[i], r, t);
      if (l1 > 0.0 && l2 > 0.0) ++front;
    }
    if (front > best_front) {
      best_front = front;
      best_k = k;
    }
  }
  if (best_front == 0) throw Error(Errc::degenerate, "no decomposition puts points in front of both cameras");
  const auto& [r, t] = candidates[best_k];
  // X2 = R X1 + t  =>  camera 2 in camera 1's frame is (R^T, -R^T t).
  const Eigen::Vector3d c2 = -r.transpose() * t;
  out.relative_pose = Pose::orthonormalized(r.transpose(), c2.normalized());
  return out;
}

}  // namespace lunarforge
