#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "boxoverlap/camera.hpp"
#include "boxoverlap/overlap.hpp"
#include "boxoverlap/retrieval.hpp"

namespace boxoverlap {

struct PlaneSurface {
  double z0 = 0.0;
};

struct Wave {
  double amplitude = 0.0;
  double wx = 0.0;  // angular frequency along x
  double wy = 0.0;  // angular frequency along y
  double phase = 0.0;
};

// z = z0 + sum_k a_k sin(w_k . (x, y) + phi_k)
struct HeightfieldSurface {
  double z0 = 0.0;
  std::vector<Wave> waves;

  double height(double x, double y) const;
  Eigen::Vector2d gradient(double x, double y) const;
  // Upper bound on |grad height|.
  double slope_bound() const;
};

struct SphereSurface {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 1.0;
};

using Surface = std::variant<PlaneSurface, HeightfieldSurface, SphereSurface>;

std::string surface_type(const Surface& s);
// Height of the surface under (x, y) as seen from above (sphere: top cap or centre height).
double surface_height(const Surface& s, double x, double y);

// Seeded heightfield used by the default dataset: three waves with a total
// amplitude well below 5% of the 10-unit scene extent.
HeightfieldSurface default_heightfield(std::uint64_t seed);
Surface make_surface(const std::string& type, std::uint64_t seed);

struct CameraPlacement {
  std::string id;
  Eigen::Vector3d position = Eigen::Vector3d(0, 0, 4);
  Eigen::Vector3d target = Eigen::Vector3d::Zero();
  double focal = 80.0;
  int width = 64;
  int height = 48;

  CameraIntrinsics intrinsics() const;
  Pose pose() const;
};

// Exact z-depth of the first ray/surface hit per pixel, NaN where the ray
// misses. Throws GeometryError when the camera is behind or inside the
// surface, or does not face it.
CameraView render_depth(const Surface& surface, const CameraIntrinsics& intrinsics,
                        const Pose& pose, std::string id);
CameraView render_depth(const Surface& surface, const CameraPlacement& camera);

// Camera-pair patterns. `parameter` is the zoom factor, jitter distance or
// tilt angle in degrees; grid patterns use `count`.
enum class PatternKind { kZoomPair, kClonePair, kObliquePair, kDisjointPair, kGrid };

struct Pattern {
  PatternKind kind = PatternKind::kGrid;
  double parameter = 0.0;
  int count = 0;
};

// Parses "zoom:2", "clone:0.2", "oblique:60", "disjoint", "grid:8".
Pattern parse_pattern(const std::string& text);
std::string to_string(const Pattern& p);

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
};

// Two cameras with the analytically expected overlap of the pair.
struct PairAnnotation {
  std::string pattern;  // "zoom", "clone", "oblique", "disjoint"
  double parameter = 0.0;
  std::string id_x;
  std::string id_y;
  Interval expected_xy;
  Interval expected_yx;
  Relation relation = Relation::kUnrelated;  // relation of y (retrieved) to x (query)
};

struct CameraScript {
  std::vector<CameraPlacement> cameras;
  std::vector<PairAnnotation> pairs;
};

// Appends the cameras of one pattern. Ids are prefixed by `tag`.
void append_pattern(CameraScript& script, const Surface& surface, const Pattern& pattern,
                    const std::string& tag, std::uint64_t seed, int width = 64,
                    int height = 48);

struct SyntheticPair {
  CameraView x;
  CameraView y;
  PairAnnotation annotation;
};

// Renders one camera pair of the given (pair) pattern over `surface`.
SyntheticPair make_pair(const Pattern& pattern, const Surface& surface, std::uint64_t seed);

struct DatasetSpec {
  std::string surface = "heightfield";
  std::vector<std::string> patterns;
  int width = 64;
  int height = 48;
  std::uint64_t seed = 7;
  NsoConfig nso;
  bool self_pairs = false;
};

// Heightfield, grid(8) + 8 zoom pairs (factors 1.5, 2, 3, 4, twice) + 8
// oblique(60) pairs, 64x48, seed 7.
DatasetSpec default_dataset_spec();
DatasetSpec parse_dataset_spec(const std::string& json_text);

CameraScript build_script(const DatasetSpec& spec, const Surface& surface);

struct Dataset {
  std::vector<CameraView> views;
  std::vector<PairAnnotation> annotations;
  std::vector<OverlapRecord> records;
};

struct GenerateOptions {
  unsigned threads = 1;
  bool oracle = false;
};

// Renders every camera of the spec (depths rounded to float32, as stored on
// disk), computes NSO for all unordered view pairs and writes the dataset
// directory when `out_dir` is set.
Dataset generate_dataset(const DatasetSpec& spec, const GenerateOptions& options,
                         const std::optional<std::filesystem::path>& out_dir);

// NSO for the given view-index pairs, in parallel across `threads`.
std::vector<OverlapRecord> compute_pairs(const std::vector<PreparedView>& views,
                                         const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                         const NsoConfig& cfg, unsigned threads, bool oracle);

}  // namespace boxoverlap
