#include <algorithm>
#include <cmath>
#include <numbers>

#include "lunarforge/error.hpp"
#include "lunarforge/pose.hpp"

namespace lunarforge {

namespace {
constexpr double kRadToDeg = 180.0 / std::numbers::pi;
}

double rra(const Eigen::Matrix3d& r_gt, const Eigen::Matrix3d& r_pred) {
  const double c = ((r_gt.transpose() * r_pred).trace() - 1.0) / 2.0;
  return std::acos(std::clamp(c, -1.0, 1.0)) * kRadToDeg;
}

double rta(const Eigen::Vector3d& t_gt, const Eigen::Vector3d& t_pred, bool sign_insensitive) {
  const double ng = t_gt.norm(), np = t_pred.norm();
  if (!(ng > 0.0) || !(np > 0.0)) throw Error(Errc::degenerate, "translation direction undefined for a zero baseline");
  double c = t_gt.dot(t_pred) / (ng * np);
  if (sign_insensitive) c = std::abs(c);
  return std::acos(std::clamp(c, -1.0, 1.0)) * kRadToDeg;
}

std::vector<double> pose_accuracy_table(const std::vector<double>& errors_deg, const std::vector<double>& thresholds_deg) {
  if (errors_deg.empty()) throw Error(Errc::insufficient_data, "no pose errors to tabulate");
  if (!std::is_sorted(thresholds_deg.begin(), thresholds_deg.end()))
    throw Error(Errc::invalid_argument, "thresholds must be sorted ascending");
  std::vector<double> sorted = errors_deg;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  out.reserve(thresholds_deg.size());
  for (double tau : thresholds_deg) {
    const auto below = std::lower_bound(sorted.begin(), sorted.end(), tau) - sorted.begin();
    out.push_back(static_cast<double>(below) / static_cast<double>(sorted.size()));
  }
  return out;
}

std::size_t ransac_trials_needed(double inlier_ratio, std::size_t sample_size, double confidence) {
  const double p_good = std::pow(std::clamp(inlier_ratio, 0.0, 1.0), static_cast<double>(sample_size));
  if (p_good >= 1.0) return 1;
  if (p_good <= 0.0) return static_cast<std::size_t>(-1);
  // log1p keeps tiny success probabilities from rounding to log(1) = 0.
  const double denom = std::log1p(-p_good);
  if (!(denom < 0.0)) return static_cast<std::size_t>(-1);
  const double n = std::log1p(-confidence) / denom;
  if (!(n < 1e18)) return static_cast<std::size_t>(-1);
  return static_cast<std::size_t>(std::ceil(std::max(n, 1.0)));
}

std::vector<std::size_t> sample_distinct(Rng& rng, std::size_t n, std::size_t k) {
  if (k > n) throw Error(Errc::insufficient_data, "sample larger than population");
  std::vector<std::size_t> out;
  out.reserve(k);
  while (out.size() < k) {
    const std::size_t i = rng.below(n);
    if (std::find(out.begin(), out.end(), i) == out.end()) out.push_back(i);
  }
  return out;
}

}  // namespace lunarforge
