#pragma once

#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace lunarforge {

struct Nearest {
  double distance = 0.0;
  std::size_t index = 0;  // into the indexed cloud
};

/// Exact nearest-neighbor queries over a fixed 3D cloud.
///
/// Points are bucketed in a uniform hash grid whose cell edge is twice the
/// expected neighbor spacing; queries search growing shells of cells. Sparse
/// or highly clustered clouds (few points per occupied cell, or shells that
/// run long) use a k-d tree instead. Both paths return the same distance as a
/// brute-force scan, bit for bit.
class NearestIndex {
 public:
  explicit NearestIndex(const std::vector<Eigen::Vector3d>& points);
  ~NearestIndex();
  NearestIndex(NearestIndex&&) noexcept;
  NearestIndex& operator=(NearestIndex&&) noexcept;

  std::size_t size() const noexcept { return count_; }
  bool uses_grid() const noexcept { return use_grid_; }
  double cell_size() const noexcept { return cell_; }

  Nearest nearest(const Eigen::Vector3d& q) const;
  Nearest nearest_kdtree(const Eigen::Vector3d& q) const;

 private:
  struct KdTree;

  std::size_t count_ = 0;
  bool use_grid_ = false;
  double cell_ = 0.0;
  Eigen::Vector3d origin_ = Eigen::Vector3d::Zero();
  // Points sorted by cell, structure of arrays.
  std::vector<double> xs_, ys_, zs_;
  std::vector<std::size_t> original_;
  std::unordered_map<std::uint64_t, std::pair<std::size_t, std::size_t>> cells_;  // key -> [begin, end)
  std::int64_t max_ring_ = 0;
  std::unique_ptr<KdTree> tree_;

  std::uint64_t key(std::int64_t i, std::int64_t j, std::int64_t k) const noexcept;
};

// O(n) scan; reference for tests.
Nearest brute_force_nearest(const std::vector<Eigen::Vector3d>& points, const Eigen::Vector3d& q);

}  // namespace lunarforge
