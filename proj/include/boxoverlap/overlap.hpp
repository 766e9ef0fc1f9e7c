#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "boxoverlap/camera.hpp"
#include "boxoverlap/kdtree.hpp"
#include "boxoverlap/surfel.hpp"

namespace boxoverlap {

// Directed normalized surface overlaps of an ordered image pair.
struct OverlapRecord {
  std::string id_x;
  std::string id_y;
  double nso_xy = 0.0;  // fraction of x's surfels seen by y
  double nso_yx = 0.0;  // fraction of y's surfels seen by x

  bool operator==(const OverlapRecord&) const = default;
};

struct NsoConfig {
  double radius = 0.1;         // world units
  std::size_t n_sub = 5000;    // source subsample size
  std::uint64_t seed = 0;
  bool weighted = true;        // cosine weighting of matched surfels
};

// Weight of a matched surfel pair: cos of the angle between unit normals,
// clamped to [0, 1]. Evaluated as 1 - |a - b|^2 / 2 so identical normals give
// exactly 1.
double match_weight(const Eigen::Vector3d& n_src, const Eigen::Vector3d& n_dst);

// Sum over src surfels of their match weight against the nearest dst surfel
// within `radius` (0 when there is none). `dst_tree` must index dst.points.
double overlap_count(const SurfelCloud& src, const SurfelCloud& dst,
                     const PointKdTree& dst_tree, double radius, bool weighted);
double overlap_count(const SurfelCloud& src, const SurfelCloud& dst, double radius,
                     bool weighted);

// O(|src|·|dst|) reference implementation of overlap_count.
double overlap_count_brute_force(const SurfelCloud& src, const SurfelCloud& dst,
                                 double radius, bool weighted);

// A view prepared for repeated overlap queries: full surfel cloud, its k-d
// tree, and the source-side subsample.
struct PreparedView {
  std::string id;
  std::size_t pixel_count = 0;
  SurfelCloud cloud;
  SurfelCloud sample;
  PointKdTree tree;
};

// Seed of the subsample drawn for view `id` under a dataset-wide seed.
std::uint64_t view_seed(std::uint64_t seed, std::string_view id);

PreparedView prepare_view(const CameraView& view, const NsoConfig& cfg);

// NSO(src -> dst) = overlap_count(sample(src) -> full(dst)) / |sample(src)|.
double directed_nso(const PreparedView& src, const PreparedView& dst, const NsoConfig& cfg);
double directed_nso_brute_force(const PreparedView& src, const PreparedView& dst,
                                const NsoConfig& cfg);

OverlapRecord compute_nso(const PreparedView& x, const PreparedView& y, const NsoConfig& cfg);
OverlapRecord compute_nso(const CameraView& x, const CameraView& y, const NsoConfig& cfg);

}  // namespace boxoverlap
