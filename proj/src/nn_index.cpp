#include "lunarforge/nn_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lunarforge/error.hpp"
#include "lunarforge/simd/kernels.hpp"

namespace lunarforge {

namespace {
constexpr std::size_t kLeafSize = 16;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Same arithmetic as the SIMD kernels, so distances agree exactly.
double sq_dist(const Eigen::Vector3d& a, const Eigen::Vector3d& q) {
  const double dx = a.x() - q.x(), dy = a.y() - q.y(), dz = a.z() - q.z();
  return (dx * dx + dy * dy) + dz * dz;
}

// Better candidate: smaller distance, then lower original index.
void offer(simd::NearestResult& best, double d2, std::size_t index) {
  if (d2 < best.dist_sq || (d2 == best.dist_sq && index < best.index)) {
    best.dist_sq = d2;
    best.index = index;
  }
}
}  // namespace

struct NearestIndex::KdTree {
  struct Node {
    std::size_t begin, end;  // range in the permuted arrays
    int axis = -1;           // -1 for a leaf
    double split = 0.0;
    std::size_t left = 0, right = 0;
    Eigen::Vector3d lo, hi;  // bounding box
  };
  std::vector<Node> nodes;
  std::vector<double> xs, ys, zs;
  std::vector<std::size_t> original;

  explicit KdTree(const std::vector<Eigen::Vector3d>& pts) {
    std::vector<std::size_t> perm(pts.size());
    std::iota(perm.begin(), perm.end(), 0);
    nodes.reserve(2 * pts.size() / kLeafSize + 2);
    build(pts, perm, 0, pts.size());
    xs.resize(pts.size());
    ys.resize(pts.size());
    zs.resize(pts.size());
    original = perm;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      xs[i] = pts[perm[i]].x();
      ys[i] = pts[perm[i]].y();
      zs[i] = pts[perm[i]].z();
    }
  }

  std::size_t build(const std::vector<Eigen::Vector3d>& pts, std::vector<std::size_t>& perm, std::size_t b,
                    std::size_t e) {
    Node node;
    node.begin = b;
    node.end = e;
    node.lo = Eigen::Vector3d::Constant(kInf);
    node.hi = Eigen::Vector3d::Constant(-kInf);
    for (std::size_t i = b; i < e; ++i) {
      node.lo = node.lo.cwiseMin(pts[perm[i]]);
      node.hi = node.hi.cwiseMax(pts[perm[i]]);
    }
    const std::size_t id = nodes.size();
    nodes.push_back(node);
    if (e - b <= kLeafSize) return id;
    int axis;
    (node.hi - node.lo).maxCoeff(&axis);
    if (!(node.hi(axis) > node.lo(axis))) return id;  // all coincident
    const std::size_t mid = b + (e - b) / 2;
    std::nth_element(perm.begin() + static_cast<std::ptrdiff_t>(b), perm.begin() + static_cast<std::ptrdiff_t>(mid),
                     perm.begin() + static_cast<std::ptrdiff_t>(e),
                     [&](std::size_t p, std::size_t q) { return pts[p](axis) < pts[q](axis); });
    const std::size_t l = build(pts, perm, b, mid);
    const std::size_t r = build(pts, perm, mid, e);
    nodes[id].axis = axis;
    nodes[id].split = pts[perm[mid]](axis);
    nodes[id].left = l;
    nodes[id].right = r;
    return id;
  }

  static double box_sq_dist(const Node& n, const Eigen::Vector3d& q) {
    double s = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double d = std::max({n.lo(a) - q(a), 0.0, q(a) - n.hi(a)});
      s += d * d;
    }
    return s;
  }

  void search(std::size_t id, const Eigen::Vector3d& q, simd::NearestResult& best) const {
    const Node& n = nodes[id];
    if (box_sq_dist(n, q) > best.dist_sq) return;
    if (n.axis < 0) {
      const auto r = simd::min_sq_dist(q.x(), q.y(), q.z(), xs.data() + n.begin, ys.data() + n.begin,
                                       zs.data() + n.begin, n.end - n.begin);
      if (r.index != static_cast<std::size_t>(-1)) {
        // The kernel keeps the first minimum in leaf order; rescan ties for the lowest original index.
        for (std::size_t i = n.begin; i < n.end; ++i) {
          const double dx = xs[i] - q.x(), dy = ys[i] - q.y(), dz = zs[i] - q.z();
          const double d2 = (dx * dx + dy * dy) + dz * dz;
          if (d2 == r.dist_sq) offer(best, d2, original[i]);
        }
      }
      return;
    }
    const bool go_left = q(n.axis) < n.split;
    search(go_left ? n.left : n.right, q, best);
    search(go_left ? n.right : n.left, q, best);
  }
};

NearestIndex::NearestIndex(const std::vector<Eigen::Vector3d>& points) : count_(points.size()) {
  if (points.empty()) throw Error(Errc::insufficient_data, "cannot index an empty cloud");
  for (const auto& p : points)
    if (!p.allFinite()) throw Error(Errc::invalid_argument, "cloud contains non-finite points");
  tree_ = std::make_unique<KdTree>(points);

  Eigen::Vector3d lo = points[0], hi = points[0];
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  // Expected spacing treats the cloud as a surface spanned by its two largest extents.
  Eigen::Vector3d ext = hi - lo;
  std::sort(ext.data(), ext.data() + 3);
  const double n = static_cast<double>(points.size());
  double spacing = ext(1) > 0.0 ? std::sqrt(ext(2) * ext(1) / n) : ext(2) / n;
  if (!(spacing > 0.0)) return;  // all points coincide: k-d tree only
  cell_ = 2.0 * spacing;
  origin_ = lo;

  std::vector<std::uint64_t> keys(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Eigen::Vector3d c = ((points[i] - origin_) / cell_).array().floor();
    keys[i] = key(static_cast<std::int64_t>(c.x()), static_cast<std::int64_t>(c.y()), static_cast<std::int64_t>(c.z()));
  }
  original_.resize(points.size());
  std::iota(original_.begin(), original_.end(), 0);
  std::stable_sort(original_.begin(), original_.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  xs_.resize(points.size());
  ys_.resize(points.size());
  zs_.resize(points.size());
  for (std::size_t i = 0; i < original_.size(); ++i) {
    const auto& p = points[original_[i]];
    xs_[i] = p.x();
    ys_[i] = p.y();
    zs_[i] = p.z();
  }
  for (std::size_t i = 0; i < original_.size();) {
    std::size_t j = i;
    const std::uint64_t k = keys[original_[i]];
    while (j < original_.size() && keys[original_[j]] == k) ++j;
    cells_.emplace(k, std::make_pair(i, j));
    i = j;
  }
  // A sparse grid (about one point per occupied cell) gains nothing over the tree.
  const double per_cell = n / static_cast<double>(cells_.size());
  use_grid_ = per_cell >= 1.5 && points.size() >= 256;
  max_ring_ = 4;
}

NearestIndex::~NearestIndex() = default;
NearestIndex::NearestIndex(NearestIndex&&) noexcept = default;
NearestIndex& NearestIndex::operator=(NearestIndex&&) noexcept = default;

std::uint64_t NearestIndex::key(std::int64_t i, std::int64_t j, std::int64_t k) const noexcept {
  const auto u = [](std::int64_t v) { return static_cast<std::uint64_t>(v + (1ll << 20)) & 0x1FFFFFull; };
  return (u(i) << 42) | (u(j) << 21) | u(k);
}

Nearest NearestIndex::nearest_kdtree(const Eigen::Vector3d& q) const {
  simd::NearestResult best;
  tree_->search(0, q, best);
  return {std::sqrt(best.dist_sq), best.index};
}

Nearest NearestIndex::nearest(const Eigen::Vector3d& q) const {
  if (!use_grid_) return nearest_kdtree(q);
  const Eigen::Vector3d c = ((q - origin_) / cell_).array().floor();
  // Far outside the indexed box: the tree prunes better than shells.
  if ((c.array().abs() > 1e6).any()) return nearest_kdtree(q);
  const auto ci = static_cast<std::int64_t>(c.x()), cj = static_cast<std::int64_t>(c.y()),
             ck = static_cast<std::int64_t>(c.z());
  simd::NearestResult best;
  for (std::int64_t ring = 0; ring <= max_ring_; ++ring) {
    for (std::int64_t di = -ring; di <= ring; ++di) {
      for (std::int64_t dj = -ring; dj <= ring; ++dj) {
        for (std::int64_t dk = -ring; dk <= ring; ++dk) {
          if (std::max({std::abs(di), std::abs(dj), std::abs(dk)}) != ring) continue;
          const auto it = cells_.find(key(ci + di, cj + dj, ck + dk));
          if (it == cells_.end()) continue;
          const auto [b, e] = it->second;
          const auto r = simd::min_sq_dist(q.x(), q.y(), q.z(), xs_.data() + b, ys_.data() + b, zs_.data() + b, e - b);
          // Cells are stored in original-index order, so the kernel's first
          // minimum is the lowest original index within the cell.
          offer(best, r.dist_sq, original_[b + r.index]);
        }
      }
    }
    // Every point outside the searched block lies at least ring*cell away.
    const double reach = static_cast<double>(ring) * cell_;
    if (best.index != static_cast<std::size_t>(-1) && best.dist_sq <= reach * reach) return {std::sqrt(best.dist_sq), best.index};
  }
  return nearest_kdtree(q);
}

Nearest brute_force_nearest(const std::vector<Eigen::Vector3d>& points, const Eigen::Vector3d& q) {
  if (points.empty()) throw Error(Errc::insufficient_data, "empty cloud");
  simd::NearestResult best;
  for (std::size_t i = 0; i < points.size(); ++i) offer(best, sq_dist(points[i], q), i);
  return {std::sqrt(best.dist_sq), best.index};
}

}  // namespace lunarforge
