#include <algorithm>
#include <cmath>
#include <optional>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "lunarforge/error.hpp"
#include "lunarforge/pose.hpp"

namespace lunarforge {

namespace {

// World-to-camera transform X_c = Q X + s.
struct CamFromWorld {
  Eigen::Matrix3d q;
  Eigen::Vector3d s;
};

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Eigen::Matrix3d so3_exp(const Eigen::Vector3d& w) {
  const double th = w.norm();
  if (th < 1e-12) return Eigen::Matrix3d::Identity() + skew(w);
  return axis_angle(w / th, th);
}

bool reproject(const Intrinsics& in, const CamFromWorld& p, const Eigen::Vector3d& x, Eigen::Vector2d& uv) {
  const Eigen::Vector3d c = p.q * x + p.s;
  if (!(c.z() < 0.0)) return false;
  uv = {in.cx - in.focal_px * c.x() / c.z(), in.cy + in.focal_px * c.y() / c.z()};
  return true;
}

double reprojection_error(const Intrinsics& in, const CamFromWorld& p, const Match2D3D& m) {
  Eigen::Vector2d uv;
  if (!reproject(in, p, m.point, uv)) return std::numeric_limits<double>::infinity();
  return (uv - Eigen::Vector2d(m.u, m.v)).norm();
}

// Direct linear transform over `idx` (at least 6). Points are centered and
// scaled first; image points use the homogeneous ray (a, b, -1).
std::optional<CamFromWorld> dlt(const std::vector<Match2D3D>& m, const Intrinsics& in, const std::vector<std::size_t>& idx) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (std::size_t i : idx) mean += m[i].point;
  mean /= static_cast<double>(idx.size());
  double spread = 0.0;
  for (std::size_t i : idx) spread += (m[i].point - mean).norm();
  spread /= static_cast<double>(idx.size());
  if (!(spread > 0.0)) return std::nullopt;
  const double k = std::sqrt(3.0) / spread;

  Eigen::MatrixXd a(std::max<std::size_t>(2 * idx.size(), 12), 12);
  a.setZero();
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const Match2D3D& mm = m[idx[r]];
    const Eigen::Vector3d y = k * (mm.point - mean);
    const Eigen::Vector4d xh(y.x(), y.y(), y.z(), 1.0);
    const double ax = (mm.u - in.cx) / in.focal_px;
    const double bx = -(mm.v - in.cy) / in.focal_px;
    // (a, b, -1) x (P X) = 0: rows  b*P3 + P2 = 0  and  -P1 - a*P3 = 0.
    const auto i0 = static_cast<Eigen::Index>(2 * r), i1 = i0 + 1;
    a.block<1, 4>(i0, 4) = xh.transpose();
    a.block<1, 4>(i0, 8) = bx * xh.transpose();
    a.block<1, 4>(i1, 0) = -xh.transpose();
    a.block<1, 4>(i1, 8) = -ax * xh.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(10) <= 1e-12 * sv(0)) return std::nullopt;
  const Eigen::VectorXd p = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> pm;
  pm << p(0), p(1), p(2), p(3), p(4), p(5), p(6), p(7), p(8), p(9), p(10), p(11);

  Eigen::Matrix3d mq = pm.leftCols<3>();
  Eigen::Vector3d ms = pm.col(3);
  // Points must land in front (camera z < 0).
  std::size_t front = 0;
  for (std::size_t i : idx) {
    const Eigen::Vector3d y = k * (m[i].point - mean);
    if ((mq * y + ms).z() < 0.0) ++front;
  }
  if (2 * front < idx.size()) {
    mq = -mq;
    ms = -ms;
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> qs(mq, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (qs.matrixU().determinant() * qs.matrixV().determinant() < 0.0) return std::nullopt;
  const double scale = qs.singularValues().mean();
  if (!(scale > 0.0)) return std::nullopt;
  CamFromWorld out;
  out.q = qs.matrixU() * qs.matrixV().transpose();
  // Undo the normalization: X_c = Q k (X - mean) + s / scale... scaled by 1/k.
  const Eigen::Vector3d s_norm = ms / scale;
  out.s = s_norm / k - out.q * mean;
  if (!out.q.allFinite() || !out.s.allFinite()) return std::nullopt;
  return out;
}

// Levenberg-Marquardt on the pixel reprojection error with a left
// perturbation X_c <- exp(w) X_c + dt.
CamFromWorld refine(const std::vector<Match2D3D>& m, const Intrinsics& in, const std::vector<std::size_t>& idx,
                    CamFromWorld p) {
  auto cost = [&](const CamFromWorld& c) {
    double s = 0.0;
    for (std::size_t i : idx) {
      const double e = reprojection_error(in, c, m[i]);
      s += e * e;
    }
    return s;
  };
  double current = cost(p);
  double lambda = 1e-3;
  for (int iter = 0; iter < 50 && std::isfinite(current); ++iter) {
    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    for (std::size_t i : idx) {
      const Eigen::Vector3d c = p.q * m[i].point + p.s;
      const double z = c.z();
      const double f = in.focal_px;
      const Eigen::Vector2d r(in.cx - f * c.x() / z - m[i].u, in.cy + f * c.y() / z - m[i].v);
      Eigen::Matrix<double, 2, 3> jp;
      jp << -f / z, 0.0, f * c.x() / (z * z), 0.0, f / z, -f * c.y() / (z * z);
      Eigen::Matrix<double, 3, 6> jc;
      jc.leftCols<3>() = -skew(c);
      jc.rightCols<3>() = Eigen::Matrix3d::Identity();
      const Eigen::Matrix<double, 2, 6> j = jp * jc;
      h += j.transpose() * j;
      g += j.transpose() * r;
    }
    bool improved = false;
    for (int tries = 0; tries < 10; ++tries) {
      Eigen::Matrix<double, 6, 6> ha = h;
      ha.diagonal() *= (1.0 + lambda);
      const Eigen::Matrix<double, 6, 1> step = -ha.ldlt().solve(g);
      if (!step.allFinite()) break;
      const Eigen::Matrix3d dr = so3_exp(step.head<3>());
      CamFromWorld cand{project_to_rotation(dr * p.q), dr * p.s + step.tail<3>()};
      const double c = cost(cand);
      if (c < current) {
        const double gain = current - c;
        p = cand;
        current = c;
        lambda = std::max(lambda * 0.3, 1e-12);
        improved = true;
        if (gain <= 1e-15 * (1.0 + current) || step.norm() < 1e-14) return p;
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) break;
  }
  return p;
}

}  // namespace

PnpEstimate solve_pnp(const std::vector<Match2D3D>& matches, const Intrinsics& intr, const RansacParams& ransac) {
  const std::size_t n = matches.size();
  if (n < 6) throw Error(Errc::insufficient_data, "PnP needs at least 6 matches");
  if (!(ransac.inlier_threshold > 0.0)) throw Error(Errc::invalid_argument, "inlier threshold must be positive");

  // Rank check on the 3D configuration: collinear points fix no pose.
  {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& m : matches) mean += m.point;
    mean /= static_cast<double>(n);
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& m : matches) cov += (m.point - mean) * (m.point - mean).transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    const Eigen::Vector3d ev = es.eigenvalues();
    if (!(ev(2) > 0.0) || ev(1) <= 1e-12 * ev(2)) throw Error(Errc::degenerate, "3D points are collinear");
  }

  Rng rng(hash_combine(ransac.seed, 0x9A9Aull));
  std::size_t best = 0;
  std::optional<CamFromWorld> best_p;
  std::size_t needed = ransac.iterations;
  for (std::size_t it = 0; it < std::min(needed, ransac.iterations); ++it) {
    const auto idx = sample_distinct(rng, n, 6);
    const auto p = dlt(matches, intr, idx);
    if (!p) continue;
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (reprojection_error(intr, *p, matches[i]) <= ransac.inlier_threshold) ++c;
    if (c > best) {
      best = c;
      best_p = p;
      needed = ransac_trials_needed(static_cast<double>(c) / static_cast<double>(n), 6, ransac.confidence);
    }
  }
  if (!best_p || best < 6) throw Error(Errc::degenerate, "no PnP hypothesis reached 6 inliers (rank-deficient input?)");

  CamFromWorld p = *best_p;
  std::vector<std::size_t> inliers;
  for (int round = 0; round < 4; ++round) {
    std::vector<std::size_t> next;
    for (std::size_t i = 0; i < n; ++i)
      if (reprojection_error(intr, p, matches[i]) <= ransac.inlier_threshold) next.push_back(i);
    if (next.size() < 6) break;
    if (next == inliers) break;
    inliers = std::move(next);
    if (const auto lin = dlt(matches, intr, inliers); lin && round == 0) {
      // Keep the linear refit only if it does not lose inliers.
      std::size_t c = 0;
      for (std::size_t i : inliers)
        if (reprojection_error(intr, *lin, matches[i]) <= ransac.inlier_threshold) ++c;
      if (c == inliers.size()) p = *lin;
    }
    p = refine(matches, intr, inliers, p);
  }
  if (inliers.size() < 6) throw Error(Errc::no_consensus, "PnP inlier set collapsed");

  PnpEstimate out;
  out.inliers.clear();
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = reprojection_error(intr, p, matches[i]);
    if (e <= ransac.inlier_threshold) {
      out.inliers.push_back(i);
      sq += e * e;
    }
  }
  out.rms_reprojection_px = out.inliers.empty() ? 0.0 : std::sqrt(sq / static_cast<double>(out.inliers.size()));
  // Camera-to-world: R = Q^T, C = -Q^T s.
  out.pose = Pose::orthonormalized(p.q.transpose(), -p.q.transpose() * p.s);
  return out;
}

}  // namespace lunarforge
