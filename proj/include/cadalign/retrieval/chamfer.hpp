#pragma once

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "cadalign/geometry/types.hpp"

namespace cadalign {

// Exact nearest-neighbor search under the L1 metric via a median-split
// kd-tree. Distances are accumulated the same way as the brute-force scan so
// both routes return bit-identical minima.
class KdTreeL1 {
 public:
  explicit KdTreeL1(const std::vector<Vec3>& pts) : pts_(pts) {
    if (pts.empty()) throw std::invalid_argument("kdtree: empty point set");
    order_.resize(pts.size());
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(2 * pts.size());
    root_ = build(0, static_cast<int>(pts.size()), 0);
  }

  double nearest_l1(const Vec3& q) const {
    double best = std::numeric_limits<double>::infinity();
    search(root_, q, &best);
    return best;
  }

 private:
  struct Node {
    int axis = -1;       // -1 marks a leaf
    double split = 0;
    int left = -1, right = -1;
    int begin = 0, end = 0;
  };

  static double l1(const Vec3& a, const Vec3& b) {
    return std::abs(a.x() - b.x()) + std::abs(a.y() - b.y()) + std::abs(a.z() - b.z());
  }

  int build(int begin, int end, int depth) {
    Node n;
    if (end - begin <= 8) {
      n.begin = begin;
      n.end = end;
      nodes_.push_back(n);
      return static_cast<int>(nodes_.size()) - 1;
    }
    const int axis = depth % 3;
    const int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) { return pts_[a][axis] < pts_[b][axis]; });
    n.axis = axis;
    n.split = pts_[order_[mid]][axis];
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(n);
    const int l = build(begin, mid, depth + 1);
    const int r = build(mid, end, depth + 1);
    nodes_[self].left = l;
    nodes_[self].right = r;
    return self;
  }

  void search(int ni, const Vec3& q, double* best) const {
    const Node& n = nodes_[ni];
    if (n.axis < 0) {
      for (int i = n.begin; i < n.end; ++i) *best = std::min(*best, l1(q, pts_[order_[i]]));
      return;
    }
    const double d = q[n.axis] - n.split;
    const int near = d < 0 ? n.left : n.right;
    const int far = d < 0 ? n.right : n.left;
    search(near, q, best);
    if (std::abs(d) < *best) search(far, q, best);
  }

  const std::vector<Vec3>& pts_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

// Symmetric L1 Chamfer distance: the sum of both directional means of
// nearest-neighbor L1 distances.
inline double chamfer_l1(const PointCloud& A, const PointCloud& B) {
  if (A.empty() || B.empty()) throw std::invalid_argument("chamfer_l1: empty point cloud");
  const KdTreeL1 ta(A.points), tb(B.points);
  double ab = 0, ba = 0;
  for (const auto& a : A.points) ab += tb.nearest_l1(a);
  for (const auto& b : B.points) ba += ta.nearest_l1(b);
  return ab / static_cast<double>(A.size()) + ba / static_cast<double>(B.size());
}

}  // namespace cadalign
