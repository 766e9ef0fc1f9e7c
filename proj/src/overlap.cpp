#include "boxoverlap/overlap.hpp"

#include <algorithm>
#include <limits>

#include "boxoverlap/error.hpp"

namespace boxoverlap {

namespace {

// True when no point of one cloud can lie within `radius` of the other.
bool bboxes_separated(const PointKdTree& a, const PointKdTree& b, double radius) {
  radius *= 1.0 + 1e-9;
  for (int k = 0; k < 3; ++k) {
    if (a.bbox_min()[k] - b.bbox_max()[k] > radius) return true;
    if (b.bbox_min()[k] - a.bbox_max()[k] > radius) return true;
  }
  return false;
}

void check_radius(double radius) {
  if (!(radius > 0.0)) throw ConfigError("overlap radius must be positive");
}

}  // namespace

double match_weight(const Eigen::Vector3d& n_src, const Eigen::Vector3d& n_dst) {
  const double c = 1.0 - 0.5 * squared_distance(n_src, n_dst);
  return std::clamp(c, 0.0, 1.0);
}

double overlap_count(const SurfelCloud& src, const SurfelCloud& dst,
                     const PointKdTree& dst_tree, double radius, bool weighted) {
  check_radius(radius);
  if (src.empty() || dst.empty()) return 0.0;

  double total = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const auto j = dst_tree.nearest_within(src.points[i], radius);
    if (!j) continue;
    total += weighted ? match_weight(src.view_normals[i], dst.view_normals[*j]) : 1.0;
  }
  return total;
}

double overlap_count(const SurfelCloud& src, const SurfelCloud& dst, double radius,
                     bool weighted) {
  const PointKdTree tree(dst.points);
  return overlap_count(src, dst, tree, radius, weighted);
}

double overlap_count_brute_force(const SurfelCloud& src, const SurfelCloud& dst,
                                 double radius, bool weighted) {
  check_radius(radius);
  if (src.empty() || dst.empty()) return 0.0;

  const double r2 = radius * radius;
  double total = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    double best = r2;
    std::size_t best_j = std::numeric_limits<std::size_t>::max();
    for (std::size_t j = 0; j < dst.size(); ++j) {
      const double d2 = squared_distance(src.points[i], dst.points[j]);
      if (d2 < best || (d2 == best && best_j == std::numeric_limits<std::size_t>::max())) {
        best = d2;
        best_j = j;
      }
    }
    if (best_j == std::numeric_limits<std::size_t>::max()) continue;
    total += weighted ? match_weight(src.view_normals[i], dst.view_normals[best_j]) : 1.0;
  }
  return total;
}

std::uint64_t view_seed(std::uint64_t seed, std::string_view id) {
  // FNV-1a over the id, mixed with the dataset seed.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : id) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h ^ (seed * 0x9E3779B97F4A7C15ULL);
}

PreparedView prepare_view(const CameraView& view, const NsoConfig& cfg) {
  if (cfg.n_sub == 0) throw ConfigError("subsample size must be at least 1");
  PreparedView out;
  out.id = view.id();
  out.pixel_count = view.intrinsics().pixel_count();
  out.cloud = backproject(view);
  out.sample = subsample(out.cloud, cfg.n_sub, view_seed(cfg.seed, view.id()));
  out.tree = PointKdTree(out.cloud.points);
  return out;
}

double directed_nso(const PreparedView& src, const PreparedView& dst, const NsoConfig& cfg) {
  check_radius(cfg.radius);
  if (bboxes_separated(src.tree, dst.tree, cfg.radius)) return 0.0;
  const double count = overlap_count(src.sample, dst.cloud, dst.tree, cfg.radius, cfg.weighted);
  return count / static_cast<double>(src.sample.size());
}

double directed_nso_brute_force(const PreparedView& src, const PreparedView& dst,
                                const NsoConfig& cfg) {
  const double count =
      overlap_count_brute_force(src.sample, dst.cloud, cfg.radius, cfg.weighted);
  return count / static_cast<double>(src.sample.size());
}

OverlapRecord compute_nso(const PreparedView& x, const PreparedView& y, const NsoConfig& cfg) {
  return {x.id, y.id, directed_nso(x, y, cfg), directed_nso(y, x, cfg)};
}

OverlapRecord compute_nso(const CameraView& x, const CameraView& y, const NsoConfig& cfg) {
  const PreparedView px = prepare_view(x, cfg);
  const PreparedView py = prepare_view(y, cfg);
  return compute_nso(px, py, cfg);
}

}  // namespace boxoverlap
