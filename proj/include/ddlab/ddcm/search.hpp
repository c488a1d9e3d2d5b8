#pragma once

// Exact k-nearest-neighbour search over metric-mapped phase points with a
// static 6-d k-d tree. Ties are resolved by the lower database index.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "ddlab/ddcm/metric.hpp"

namespace ddlab {

struct Neighbor {
  std::size_t index = 0;
  double dist2 = 0.0;  // squared local-norm distance

  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
  }
};

class KdTree {
 public:
  static constexpr int kLeafSize = 8;

  KdTree() = default;
  explicit KdTree(std::vector<Vec6> pts) : pts_(std::move(pts)) {
    order_.resize(pts_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (!pts_.empty()) build(0, pts_.size());
  }

  std::size_t size() const { return pts_.size(); }
  const Vec6& point(std::size_t i) const { return pts_[i]; }

  /// The k nearest points, sorted by (distance, index).
  std::vector<Neighbor> knn(const Vec6& q, std::size_t k) const {
    k = std::min(k, pts_.size());
    std::vector<Neighbor> heap;  // max-heap on (dist2, index)
    heap.reserve(k + 1);
    if (k > 0) search(0, q, k, heap);
    std::sort_heap(heap.begin(), heap.end());
    return heap;
  }

 private:
  struct Node {
    std::size_t begin, end;
    int dim = -1;  // -1 for leaves
    double split = 0.0;
    int left = -1, right = -1;
  };

  int build(std::size_t begin, std::size_t end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({begin, end});
    if (end - begin <= static_cast<std::size_t>(kLeafSize)) return id;
    Vec6 lo = Vec6::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
    for (std::size_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(pts_[order_[i]]);
      hi = hi.cwiseMax(pts_[order_[i]]);
    }
    int dim = 0;
    (hi - lo).maxCoeff(&dim);
    if (hi[dim] == lo[dim]) return id;  // all points coincide
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin), order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) { return pts_[a][dim] < pts_[b][dim]; });
    const double split = pts_[order_[mid]][dim];
    const int l = build(begin, mid);
    const int r = build(mid, end);
    nodes_[static_cast<std::size_t>(id)].dim = dim;
    nodes_[static_cast<std::size_t>(id)].split = split;
    nodes_[static_cast<std::size_t>(id)].left = l;
    nodes_[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  void offer(const Neighbor& n, std::size_t k, std::vector<Neighbor>& heap) const {
    if (heap.size() < k) {
      heap.push_back(n);
      std::push_heap(heap.begin(), heap.end());
    } else if (n < heap.front()) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = n;
      std::push_heap(heap.begin(), heap.end());
    }
  }

  void search(int id, const Vec6& q, std::size_t k, std::vector<Neighbor>& heap) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.dim < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const std::size_t p = order_[i];
        offer({p, (pts_[p] - q).squaredNorm()}, k, heap);
      }
      return;
    }
    const double diff = q[n.dim] - n.split;
    const int near = diff < 0.0 ? n.left : n.right;
    const int far = diff < 0.0 ? n.right : n.left;
    search(near, q, k, heap);
    // Equal distances must still be visited for the index tie-break.
    if (heap.size() < k || diff * diff <= heap.front().dist2) search(far, q, k, heap);
  }

  std::vector<Vec6> pts_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

/// Database points and their mapped coordinates under a fixed metric.
class SearchIndex {
 public:
  SearchIndex(std::vector<PhasePoint> points, MetricTensor metric) : points_(std::move(points)), metric_(metric) {
    if (points_.empty()) throw DegenerateDatabase("search index over an empty database");
    std::vector<Vec6> mapped;
    mapped.reserve(points_.size());
    for (const PhasePoint& z : points_) mapped.push_back(metric_.map(z));
    tree_ = KdTree(std::move(mapped));
  }

  std::size_t size() const { return points_.size(); }
  const PhasePoint& point(std::size_t i) const { return points_[i]; }
  const std::vector<PhasePoint>& points() const { return points_; }
  const Vec6& mapped(std::size_t i) const { return tree_.point(i); }
  const MetricTensor& metric() const { return metric_; }

  std::vector<Neighbor> knn(const PhasePoint& z, std::size_t k) const { return tree_.knn(metric_.map(z), k); }

  Neighbor nearest(const PhasePoint& z) const { return tree_.knn(metric_.map(z), 1).front(); }

 private:
  std::vector<PhasePoint> points_;
  MetricTensor metric_;
  KdTree tree_;
};

/// Closest database state under the local norm and its index.
inline std::pair<PhasePoint, std::size_t> nearest_state(const SearchIndex& ix, const PhasePoint& z) {
  const Neighbor n = ix.nearest(z);
  return {ix.point(n.index), n.index};
}

}  // namespace ddlab
