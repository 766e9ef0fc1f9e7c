#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace boxoverlap {

// Static 3-D k-d tree answering exact "nearest point within radius" queries.
//
// Ties in squared distance resolve to the lowest point index, so the answer is
// identical to a linear scan that keeps the first strictly-closer point.
class PointKdTree {
 public:
  PointKdTree() = default;
  explicit PointKdTree(std::span<const Eigen::Vector3d> points);

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  // Index of the nearest point with squared distance <= radius^2.
  std::optional<std::size_t> nearest_within(const Eigen::Vector3d& query,
                                            double radius) const;

  const Eigen::Vector3d& bbox_min() const { return bbox_min_; }
  const Eigen::Vector3d& bbox_max() const { return bbox_max_; }

 private:
  struct Node {
    // Leaf: [begin, end) into order_. Inner: split on `axis` at `split`.
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    int axis = -1;
    double split = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node, const Eigen::Vector3d& q, double& best_d2,
              std::size_t& best_idx) const;

  std::vector<Eigen::Vector3d> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  Eigen::Vector3d bbox_min_ = Eigen::Vector3d::Zero();
  Eigen::Vector3d bbox_max_ = Eigen::Vector3d::Zero();
};

// Squared Euclidean distance; shared by the tree and the brute-force scan so
// both compare bit-identical values.
inline double squared_distance(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace boxoverlap
