#include "boxoverlap/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace boxoverlap {

namespace {

constexpr std::uint32_t kLeafSize = 8;

}  // namespace

PointKdTree::PointKdTree(std::span<const Eigen::Vector3d> points)
    : points_(points.begin(), points.end()) {
  if (points_.empty()) return;
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), std::uint32_t{0});
  bbox_min_ = bbox_max_ = points_.front();
  for (const auto& p : points_) {
    bbox_min_ = bbox_min_.cwiseMin(p);
    bbox_max_ = bbox_max_.cwiseMax(p);
  }
  nodes_.reserve(2 * points_.size() / kLeafSize + 1);
  build(0, static_cast<std::uint32_t>(order_.size()));
}

std::int32_t PointKdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({begin, end, -1, -1, -1, 0.0});
  if (end - begin <= kLeafSize) return id;

  Eigen::Vector3d lo = points_[order_[begin]];
  Eigen::Vector3d hi = lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all points coincide

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double va = points_[a][axis];
                     const double vb = points_[b][axis];
                     return va < vb || (va == vb && a < b);
                   });
  const double split = points_[order_[mid]][axis];

  nodes_[id].axis = axis;
  nodes_[id].split = split;
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void PointKdTree::search(std::int32_t node_id, const Eigen::Vector3d& q, double& best_d2,
                         std::size_t& best_idx) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::uint32_t idx = order_[i];
      const double d2 = squared_distance(q, points_[idx]);
      if (d2 < best_d2 || (d2 == best_d2 && idx < best_idx)) {
        best_d2 = d2;
        best_idx = idx;
      }
    }
    return;
  }
  // Left holds coordinates <= split, right holds coordinates >= split.
  const double diff = q[node.axis] - node.split;
  const std::int32_t near = diff <= 0.0 ? node.left : node.right;
  const std::int32_t far = diff <= 0.0 ? node.right : node.left;
  search(near, q, best_d2, best_idx);
  // Ties can still live on the far side when the plane distance equals best.
  if (diff * diff <= best_d2) search(far, q, best_d2, best_idx);
}

std::optional<std::size_t> PointKdTree::nearest_within(const Eigen::Vector3d& query,
                                                       double radius) const {
  if (points_.empty()) return std::nullopt;
  double best_d2 = radius * radius;
  std::size_t best_idx = std::numeric_limits<std::size_t>::max();
  search(0, query, best_d2, best_idx);
  if (best_idx == std::numeric_limits<std::size_t>::max()) return std::nullopt;
  return best_idx;
}

}  // namespace boxoverlap
