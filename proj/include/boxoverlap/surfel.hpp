#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "boxoverlap/camera.hpp"

namespace boxoverlap {

struct PixelCoord {
  int row = 0;
  int col = 0;
  bool operator==(const PixelCoord&) const = default;
};

// Oriented points back-projected from one view.
//
// `normals` are unit world-frame surface normals facing the originating
// camera. `view_normals` are the same normals expressed in that camera's
// frame; the cosine weighting of the overlap measure compares these, so two
// views of one surface patch are down-weighted by their difference in
// viewing angle.
struct SurfelCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> normals;
  std::vector<Eigen::Vector3d> view_normals;
  std::vector<PixelCoord> source_pixel;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

// Per-pixel camera-frame normals (row-major); std::nullopt where the 3x3
// neighbourhood holds fewer than 4 valid depths.
std::vector<std::optional<Eigen::Vector3d>> estimate_normals(const CameraView& view);

// One surfel per valid pixel that also has an estimable normal.
// Throws GeometryError("no valid depth") when nothing survives.
SurfelCloud backproject(const CameraView& view);

// Uniform sample without replacement of min(n, |cloud|) surfels, keeping the
// original relative order. Deterministic in `seed`.
SurfelCloud subsample(const SurfelCloud& cloud, std::size_t n, std::uint64_t seed);

}  // namespace boxoverlap
