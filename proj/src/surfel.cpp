#include "boxoverlap/surfel.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <numeric>
#include <random>

#include "boxoverlap/error.hpp"

namespace boxoverlap {

namespace {

constexpr int kMinNeighbourhood = 4;

}  // namespace

std::vector<std::optional<Eigen::Vector3d>> estimate_normals(const CameraView& view) {
  const int w = view.width();
  const int h = view.height();
  std::vector<std::optional<Eigen::Vector3d>> normals(view.depth().size());

  std::array<Eigen::Vector3d, 9> nbr;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!view.valid(r, c)) continue;
      int n = 0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr;
          const int cc = c + dc;
          if (rr < 0 || rr >= h || cc < 0 || cc >= w || !view.valid(rr, cc)) continue;
          nbr[n++] = view.camera_point(rr, cc);
        }
      }
      if (n < kMinNeighbourhood) continue;

      Eigen::Vector3d mean = Eigen::Vector3d::Zero();
      for (int i = 0; i < n; ++i) mean += nbr[i];
      mean /= n;
      Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
      for (int i = 0; i < n; ++i) {
        const Eigen::Vector3d d = nbr[i] - mean;
        cov += d * d.transpose();
      }
      // Eigenvalues come back in increasing order.
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
      Eigen::Vector3d normal = solver.eigenvectors().col(0).normalized();
      if (!normal.allFinite()) continue;
      // Camera centre is the origin of the camera frame.
      if (normal.dot(view.camera_point(r, c)) > 0.0) normal = -normal;
      normals[static_cast<std::size_t>(r) * w + c] = normal;
    }
  }
  return normals;
}

SurfelCloud backproject(const CameraView& view) {
  const auto normals = estimate_normals(view);
  const Pose& pose = view.pose();
  SurfelCloud cloud;
  const std::size_t expected = view.valid_count();
  cloud.points.reserve(expected);
  cloud.normals.reserve(expected);
  cloud.view_normals.reserve(expected);
  cloud.source_pixel.reserve(expected);

  for (int r = 0; r < view.height(); ++r) {
    for (int c = 0; c < view.width(); ++c) {
      const auto& n = normals[static_cast<std::size_t>(r) * view.width() + c];
      if (!n) continue;
      cloud.points.push_back(pose.apply(view.camera_point(r, c)));
      cloud.normals.push_back((pose.rotation * *n).normalized());
      cloud.view_normals.push_back(*n);
      cloud.source_pixel.push_back({r, c});
    }
  }
  if (cloud.empty()) {
    throw GeometryError("view '" + view.id() + "': no valid depth");
  }
  return cloud;
}

SurfelCloud subsample(const SurfelCloud& cloud, std::size_t n, std::uint64_t seed) {
  if (n >= cloud.size()) return cloud;

  // Partial Fisher-Yates over indices, then restore source order.
  std::vector<std::size_t> idx(cloud.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());

  SurfelCloud out;
  out.points.reserve(n);
  out.normals.reserve(n);
  out.view_normals.reserve(n);
  out.source_pixel.reserve(n);
  for (std::size_t i : idx) {
    out.points.push_back(cloud.points[i]);
    out.normals.push_back(cloud.normals[i]);
    out.view_normals.push_back(cloud.view_normals[i]);
    out.source_pixel.push_back(cloud.source_pixel[i]);
  }
  return out;
}

}  // namespace boxoverlap
