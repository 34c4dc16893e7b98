#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "gpfield/types.hpp"

namespace gpfield {

struct Neighbor {
  std::uint32_t index;
  double dist2;

  // Ties broken by index so results are deterministic.
  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
  }
};

/// Static 3D kd-tree for k-nearest-neighbour lookups.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(std::span<const Vec3> points) { build(points); }

  void build(std::span<const Vec3> points) {
    points_.assign(points.begin(), points.end());
    order_.resize(points_.size());
    for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
    nodes_.clear();
    if (!points_.empty()) {
      nodes_.reserve(2 * points_.size() / kLeafSize + 1);
      build_node(0, static_cast<std::uint32_t>(points_.size()));
    }
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Vec3& point(std::size_t i) const { return points_[i]; }

  /// The k nearest points sorted by (distance, index).
  std::vector<Neighbor> knn(const Vec3& q, std::size_t k) const {
    std::vector<Neighbor> heap;
    if (points_.empty() || k == 0) return heap;
    k = std::min(k, points_.size());
    heap.reserve(k + 1);
    search(0, q, k, heap);
    std::sort_heap(heap.begin(), heap.end());
    return heap;
  }

  Neighbor nearest(const Vec3& q) const { return knn(q, 1).front(); }

 private:
  static constexpr std::uint32_t kLeafSize = 8;

  struct Node {
    std::uint32_t begin, end;
    std::int32_t left = -1, right = -1;
    int axis = 0;
    double split = 0.0;
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Zero();
  };

  std::int32_t build_node(std::uint32_t begin, std::uint32_t end) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({begin, end});
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (std::uint32_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    nodes_[id].lo = lo;
    nodes_[id].hi = hi;
    if (end - begin <= kLeafSize) return id;

    int axis;
    (hi - lo).maxCoeff(&axis);
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       return points_[a][axis] < points_[b][axis] ||
                              (points_[a][axis] == points_[b][axis] && a < b);
                     });
    const std::int32_t l = build_node(begin, mid);
    const std::int32_t r = build_node(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = points_[order_[mid]][axis];
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  static double box_dist2(const Node& n, const Vec3& q) {
    const Vec3 d = (n.lo - q).cwiseMax(q - n.hi).cwiseMax(0.0);
    return d.squaredNorm();
  }

  void search(std::int32_t id, const Vec3& q, std::size_t k, std::vector<Neighbor>& heap) const {
    const Node& n = nodes_[id];
    if (heap.size() == k && box_dist2(n, q) > heap.front().dist2) return;
    if (n.left < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const Neighbor cand{order_[i], (points_[order_[i]] - q).squaredNorm()};
        if (heap.size() < k) {
          heap.push_back(cand);
          std::push_heap(heap.begin(), heap.end());
        } else if (cand < heap.front()) {
          std::pop_heap(heap.begin(), heap.end());
          heap.back() = cand;
          std::push_heap(heap.begin(), heap.end());
        }
      }
      return;
    }
    const bool go_left = q[n.axis] < n.split;
    search(go_left ? n.left : n.right, q, k, heap);
    search(go_left ? n.right : n.left, q, k, heap);
  }

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace gpfield
