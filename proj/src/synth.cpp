#include "boxoverlap/synth.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "boxoverlap/error.hpp"
#include "boxoverlap/io.hpp"

namespace boxoverlap {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kSceneHalfExtent = 5.0;
constexpr double kGridHeight = 4.0;
constexpr double kGridHeightJitter = 0.5;
constexpr double kZoomWideHeight = 10.0;
constexpr double kPairHeight = 4.0;
constexpr double kDisjointOffset = 50.0;
constexpr double kExpectedTolerance = 0.05;
constexpr double kMinValidFraction = 0.5;

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

// First positive root of the ray/heightfield equation by conservative
// Lipschitz stepping, polished with Newton iterations.
double intersect_heightfield(const HeightfieldSurface& hf, const Eigen::Vector3d& o,
                             const Eigen::Vector3d& d) {
  auto gap = [&](double t) { return o.z() + t * d.z() - hf.height(o.x() + t * d.x(), o.y() + t * d.y()); };
  const double step_bound = std::abs(d.z()) + hf.slope_bound() * std::hypot(d.x(), d.y());
  const double tol = 1e-13 * (1.0 + std::abs(o.z()));
  constexpr double kMaxT = 1e4;
  constexpr int kMaxSteps = 100000;

  double t = 0.0;
  double g = gap(t);
  int steps = 0;
  while (g > tol) {
    t += g / step_bound;
    if (t > kMaxT || ++steps > kMaxSteps) return kNaN;
    g = gap(t);
  }
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector2d grad = hf.gradient(o.x() + t * d.x(), o.y() + t * d.y());
    const double slope = d.z() - grad.x() * d.x() - grad.y() * d.y();
    if (slope == 0.0) break;
    const double next = t - gap(t) / slope;
    if (!(next > 0.0)) break;
    t = next;
  }
  return t;
}

// Nearest positive root of |o + t d - c|^2 = r^2 (numerically stable form).
double intersect_sphere(const SphereSurface& s, const Eigen::Vector3d& o,
                        const Eigen::Vector3d& d) {
  const Eigen::Vector3d oc = o - s.center;
  const double a = d.squaredNorm();
  const double b = d.dot(oc);
  const double c = oc.squaredNorm() - s.radius * s.radius;
  const double disc = b * b - a * c;
  if (disc < 0.0) return kNaN;
  const double q = -(b + std::copysign(std::sqrt(disc), b));
  double t0 = q / a;
  double t1 = q != 0.0 ? c / q : t0;
  if (t0 > t1) std::swap(t0, t1);
  if (t0 > 0.0) return t0;
  if (t1 > 0.0) return t1;
  return kNaN;
}

double intersect(const Surface& surface, const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
  if (const auto* p = std::get_if<PlaneSurface>(&surface)) {
    if (d.z() == 0.0) return kNaN;
    const double t = (p->z0 - o.z()) / d.z();
    return t > 0.0 ? t : kNaN;
  }
  if (const auto* hf = std::get_if<HeightfieldSurface>(&surface)) {
    return intersect_heightfield(*hf, o, d);
  }
  return intersect_sphere(std::get<SphereSurface>(surface), o, d);
}

void check_camera(const Surface& surface, const Pose& pose) {
  const Eigen::Vector3d& o = pose.translation;
  const Eigen::Vector3d forward = pose.rotation.col(2);
  if (const auto* p = std::get_if<PlaneSurface>(&surface)) {
    if (o.z() <= p->z0) throw GeometryError("camera is behind the plane");
    if (forward.z() >= 0.0) throw GeometryError("camera does not face the plane");
  } else if (const auto* hf = std::get_if<HeightfieldSurface>(&surface)) {
    if (o.z() <= hf->height(o.x(), o.y())) throw GeometryError("camera is below the heightfield");
    if (forward.z() >= 0.0) throw GeometryError("camera does not face the heightfield");
  } else {
    const auto& s = std::get<SphereSurface>(surface);
    if ((o - s.center).norm() <= s.radius) throw GeometryError("camera is inside the sphere");
    if (forward.dot(s.center - o) <= 0.0) throw GeometryError("camera does not face the sphere");
  }
}

CameraPlacement nadir_camera(std::string id, const Surface& surface, double x, double y,
                             double height, double focal, int width, int h_px) {
  const Eigen::Vector3d target(x, y, surface_height(surface, x, y));
  return {std::move(id), target + Eigen::Vector3d(0, 0, height), target, focal, width, h_px};
}

Interval around(double centre) {
  return {std::max(0.0, centre - kExpectedTolerance), std::min(1.0, centre + kExpectedTolerance)};
}

}  // namespace

double HeightfieldSurface::height(double x, double y) const {
  double z = z0;
  for (const auto& w : waves) z += w.amplitude * std::sin(w.wx * x + w.wy * y + w.phase);
  return z;
}

Eigen::Vector2d HeightfieldSurface::gradient(double x, double y) const {
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  for (const auto& w : waves) {
    const double c = w.amplitude * std::cos(w.wx * x + w.wy * y + w.phase);
    g += c * Eigen::Vector2d(w.wx, w.wy);
  }
  return g;
}

double HeightfieldSurface::slope_bound() const {
  double s = 0.0;
  for (const auto& w : waves) s += std::abs(w.amplitude) * std::hypot(w.wx, w.wy);
  return s;
}

std::string surface_type(const Surface& s) {
  if (std::holds_alternative<PlaneSurface>(s)) return "plane";
  if (std::holds_alternative<HeightfieldSurface>(s)) return "heightfield";
  return "sphere";
}

double surface_height(const Surface& s, double x, double y) {
  if (const auto* p = std::get_if<PlaneSurface>(&s)) return p->z0;
  if (const auto* hf = std::get_if<HeightfieldSurface>(&s)) return hf->height(x, y);
  const auto& sp = std::get<SphereSurface>(s);
  const double r2 = sp.radius * sp.radius - (x - sp.center.x()) * (x - sp.center.x()) -
                    (y - sp.center.y()) * (y - sp.center.y());
  return r2 > 0.0 ? sp.center.z() + std::sqrt(r2) : sp.center.z();
}

HeightfieldSurface default_heightfield(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(0.05, 0.12);
  std::uniform_real_distribution<double> freq(0.3, 0.9);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  HeightfieldSurface hf;
  for (int k = 0; k < 3; ++k) {
    const double a = amp(rng);
    const double w = freq(rng);
    const double dir = angle(rng);
    const double phase = angle(rng);
    hf.waves.push_back({a, w * std::cos(dir), w * std::sin(dir), phase});
  }
  return hf;
}

Surface make_surface(const std::string& type, std::uint64_t seed) {
  if (type == "plane") return PlaneSurface{};
  if (type == "heightfield") return default_heightfield(seed);
  if (type == "sphere") return SphereSurface{Eigen::Vector3d(0, 0, -2), 4.0};
  throw ConfigError("unknown surface type '" + type + "' (expected plane|heightfield|sphere)");
}

CameraIntrinsics CameraPlacement::intrinsics() const {
  return {focal, focal, 0.5 * width, 0.5 * height, width, height};
}

Pose CameraPlacement::pose() const { return look_at(position, target); }

CameraView render_depth(const Surface& surface, const CameraIntrinsics& intrinsics,
                        const Pose& pose, std::string id) {
  intrinsics.validate();
  pose.validate();
  check_camera(surface, pose);
  std::vector<double> depth(intrinsics.pixel_count(), kNaN);
  for (int r = 0; r < intrinsics.height; ++r) {
    for (int c = 0; c < intrinsics.width; ++c) {
      // Ray parameterised so that t equals the camera-frame z of the hit.
      const Eigen::Vector3d ray_cam((c - intrinsics.cx) / intrinsics.fx,
                                    (r - intrinsics.cy) / intrinsics.fy, 1.0);
      const Eigen::Vector3d ray = pose.rotation * ray_cam;
      depth[static_cast<std::size_t>(r) * intrinsics.width + c] =
          intersect(surface, pose.translation, ray);
    }
  }
  return CameraView(std::move(id), intrinsics, pose, std::move(depth));
}

CameraView render_depth(const Surface& surface, const CameraPlacement& camera) {
  return render_depth(surface, camera.intrinsics(), camera.pose(), camera.id);
}

Pattern parse_pattern(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  auto number = [&](double fallback) {
    if (arg.empty()) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(arg, &used);
      if (used != arg.size()) throw std::invalid_argument(arg);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("pattern '" + text + "': bad parameter '" + arg + "'");
    }
  };
  Pattern p;
  if (name == "zoom") {
    p = {PatternKind::kZoomPair, number(2.0), 0};
    if (!(p.parameter > 1.0)) throw ConfigError("zoom factor must be > 1");
  } else if (name == "clone") {
    p = {PatternKind::kClonePair, number(0.0), 0};
    if (!(p.parameter >= 0.0)) throw ConfigError("clone jitter must be >= 0");
  } else if (name == "oblique") {
    p = {PatternKind::kObliquePair, number(60.0), 0};
    if (!(p.parameter > 0.0 && p.parameter < 85.0)) {
      throw ConfigError("oblique angle must be in (0, 85) degrees");
    }
  } else if (name == "disjoint") {
    p = {PatternKind::kDisjointPair, 0.0, 0};
  } else if (name == "grid") {
    const double n = number(3.0);
    if (!(n >= 1.0 && n <= 32.0) || n != std::floor(n)) {
      throw ConfigError("grid size must be an integer in [1, 32]");
    }
    p = {PatternKind::kGrid, 0.0, static_cast<int>(n)};
  } else {
    throw ConfigError("unknown pattern '" + text + "'");
  }
  return p;
}

std::string to_string(const Pattern& p) {
  std::ostringstream out;
  switch (p.kind) {
    case PatternKind::kZoomPair:
      out << "zoom:" << p.parameter;
      break;
    case PatternKind::kClonePair:
      out << "clone:" << p.parameter;
      break;
    case PatternKind::kObliquePair:
      out << "oblique:" << p.parameter;
      break;
    case PatternKind::kDisjointPair:
      out << "disjoint";
      break;
    case PatternKind::kGrid:
      out << "grid:" << p.count;
      break;
  }
  return out.str();
}

void append_pattern(CameraScript& script, const Surface& surface, const Pattern& pattern,
                    const std::string& tag, std::uint64_t seed, int width, int height) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  const double focal = 80.0 * width / 64.0;
  auto& cams = script.cameras;

  switch (pattern.kind) {
    case PatternKind::kGrid: {
      const int n = pattern.count;
      const double spacing = 2.0 * kSceneHalfExtent / n;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          const double x = -kSceneHalfExtent + (j + 0.5) * spacing;
          const double y = -kSceneHalfExtent + (i + 0.5) * spacing;
          const double h = kGridHeight + uniform(-kGridHeightJitter, kGridHeightJitter);
          char id[32];
          std::snprintf(id, sizeof(id), "%s%02d", tag.c_str(), i * n + j);
          cams.push_back(nadir_camera(id, surface, x, y, h, focal, width, height));
        }
      }
      return;
    }
    case PatternKind::kZoomPair: {
      const double f = pattern.parameter;
      const double x = uniform(-2.5, 2.5);
      const double y = uniform(-2.5, 2.5);
      CameraPlacement wide = nadir_camera(tag + "w", surface, x, y, kZoomWideHeight, focal, width, height);
      CameraPlacement tele = wide;
      tele.id = tag + "n";
      tele.focal = focal * f;
      cams.push_back(wide);
      cams.push_back(tele);
      script.pairs.push_back({"zoom", f, wide.id, tele.id, around(1.0 / (f * f)),
                              {1.0 - 0.02, 1.0}, Relation::kZoomIn});
      return;
    }
    case PatternKind::kClonePair: {
      const double jitter = pattern.parameter;
      const double x = uniform(-3.0, 3.0);
      const double y = uniform(-3.0, 3.0);
      const double phi = uniform(0.0, 2.0 * std::numbers::pi);
      const double dx = jitter * std::cos(phi);
      const double dy = jitter * std::sin(phi);
      CameraPlacement a = nadir_camera(tag + "a", surface, x, y, kPairHeight, focal, width, height);
      CameraPlacement b = jitter == 0.0
                              ? a
                              : nadir_camera(tag + "b", surface, x + dx, y + dy, kPairHeight,
                                             focal, width, height);
      b.id = tag + "b";
      cams.push_back(a);
      cams.push_back(b);
      // Footprint rectangles on a plane, the shifted edge dilated by the match radius.
      Interval expected{1.0, 1.0};
      if (jitter > 0.0) {
        const double fw = kPairHeight * width / focal;
        const double fh = kPairHeight * height / focal;
        const double r = NsoConfig{}.radius;
        const double fx = std::min(1.0, (fw - std::abs(dx) + (dx != 0.0 ? r : 0.0)) / fw);
        const double fy = std::min(1.0, (fh - std::abs(dy) + (dy != 0.0 ? r : 0.0)) / fh);
        expected = around(std::max(0.0, fx) * std::max(0.0, fy));
      }
      script.pairs.push_back({"clone", jitter, a.id, b.id, expected, expected,
                              Relation::kCloneLike});
      return;
    }
    case PatternKind::kObliquePair: {
      const double theta = deg2rad(pattern.parameter);
      const double x = uniform(-3.0, 3.0);
      const double y = uniform(-3.0, 3.0);
      const double phi = uniform(0.0, 2.0 * std::numbers::pi);
      CameraPlacement a = nadir_camera(tag + "a", surface, x, y, kPairHeight, focal, width, height);
      CameraPlacement b = a;
      b.id = tag + "b";
      b.position = a.target + kPairHeight * Eigen::Vector3d(std::sin(theta) * std::cos(phi),
                                                            std::sin(theta) * std::sin(phi),
                                                            std::cos(theta));
      cams.push_back(a);
      cams.push_back(b);
      const Interval expected{0.0, std::min(1.0, std::cos(theta) + kExpectedTolerance)};
      // Cosine weighting caps both overlaps near cos(theta); a mild tilt keeps
      // the nadir side above the high threshold, which reads as clone-like.
      const Relation relation = std::cos(theta) >= RelationThresholds{}.high
                                    ? Relation::kCloneLike
                                    : Relation::kObliqueOrCropOut;
      script.pairs.push_back({"oblique", pattern.parameter, a.id, b.id, expected, expected, relation});
      return;
    }
    case PatternKind::kDisjointPair: {
      const double x = uniform(-1.0, 1.0);
      const double y = uniform(-1.0, 1.0);
      CameraPlacement a = nadir_camera(tag + "a", surface, x, y, kPairHeight, focal, width, height);
      CameraPlacement b = nadir_camera(tag + "b", surface, x + kDisjointOffset, y, kPairHeight,
                                       focal, width, height);
      cams.push_back(a);
      cams.push_back(b);
      script.pairs.push_back({"disjoint", 0.0, a.id, b.id, {0.0, 0.0}, {0.0, 0.0},
                              Relation::kUnrelated});
      return;
    }
  }
}

SyntheticPair make_pair(const Pattern& pattern, const Surface& surface, std::uint64_t seed) {
  if (pattern.kind == PatternKind::kGrid) throw ConfigError("make_pair needs a pair pattern");
  CameraScript script;
  append_pattern(script, surface, pattern, "p", seed);
  return {render_depth(surface, script.cameras[0]), render_depth(surface, script.cameras[1]),
          script.pairs.front()};
}

DatasetSpec default_dataset_spec() {
  DatasetSpec spec;
  spec.patterns = {"grid:8"};
  for (int rep = 0; rep < 2; ++rep) {
    for (const char* z : {"zoom:1.5", "zoom:2", "zoom:3", "zoom:4"}) spec.patterns.push_back(z);
  }
  for (int i = 0; i < 8; ++i) spec.patterns.push_back("oblique:60");
  return spec;
}

DatasetSpec parse_dataset_spec(const std::string& json_text) {
  DatasetSpec spec = default_dataset_spec();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
    if (j.contains("surface")) spec.surface = j.at("surface").get<std::string>();
    if (j.contains("patterns")) spec.patterns = j.at("patterns").get<std::vector<std::string>>();
    if (j.contains("width")) spec.width = j.at("width").get<int>();
    if (j.contains("height")) spec.height = j.at("height").get<int>();
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("radius")) spec.nso.radius = j.at("radius").get<double>();
    if (j.contains("n_sub")) spec.nso.n_sub = j.at("n_sub").get<std::size_t>();
    if (j.contains("weighted")) spec.nso.weighted = j.at("weighted").get<bool>();
    if (j.contains("self_pairs")) spec.self_pairs = j.at("self_pairs").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("generator config: ") + e.what());
  }
  return spec;
}

CameraScript build_script(const DatasetSpec& spec, const Surface& surface) {
  if (spec.width < 4 || spec.height < 4) throw ConfigError("image size must be at least 4x4");
  CameraScript script;
  int pair_index = 0;
  int grid_index = 0;
  for (std::size_t i = 0; i < spec.patterns.size(); ++i) {
    const Pattern p = parse_pattern(spec.patterns[i]);
    std::string tag;
    switch (p.kind) {
      case PatternKind::kGrid:
        tag = grid_index == 0 ? "g" : "g" + std::to_string(grid_index) + "_";
        ++grid_index;
        break;
      case PatternKind::kZoomPair:
        tag = "z" + std::to_string(pair_index++);
        break;
      case PatternKind::kClonePair:
        tag = "c" + std::to_string(pair_index++);
        break;
      case PatternKind::kObliquePair:
        tag = "o" + std::to_string(pair_index++);
        break;
      case PatternKind::kDisjointPair:
        tag = "d" + std::to_string(pair_index++);
        break;
    }
    append_pattern(script, surface, p, tag, spec.seed * 1000003ULL + i, spec.width, spec.height);
  }
  if (script.cameras.size() < 2) throw ConfigError("a dataset needs at least two cameras");
  return script;
}

std::vector<OverlapRecord> compute_pairs(
    const std::vector<PreparedView>& views,
    const std::vector<std::pair<std::size_t, std::size_t>>& pairs, const NsoConfig& cfg,
    unsigned threads, bool oracle) {
  std::vector<OverlapRecord> out(pairs.size());
  std::vector<std::exception_ptr> errors(std::max(1u, threads));
  auto worker = [&](unsigned t, unsigned stride) {
    try {
      for (std::size_t i = t; i < pairs.size(); i += stride) {
        const auto& x = views[pairs[i].first];
        const auto& y = views[pairs[i].second];
        out[i] = compute_nso(x, y, cfg);
        if (oracle) {
          const double bxy = directed_nso_brute_force(x, y, cfg);
          const double byx = directed_nso_brute_force(y, x, cfg);
          if (bxy != out[i].nso_xy || byx != out[i].nso_yx) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "oracle mismatch on (" << x.id << "," << y.id << "): indexed (" << out[i].nso_xy
                << "," << out[i].nso_yx << ") vs brute force (" << bxy << "," << byx << ")";
            throw DataError(msg.str());
          }
        }
      }
    } catch (...) {
      errors[t] = std::current_exception();
    }
  };
  const unsigned n_threads = std::max(1u, threads);
  if (n_threads == 1) {
    worker(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker, t, n_threads);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

Dataset generate_dataset(const DatasetSpec& spec, const GenerateOptions& options,
                         const std::optional<std::filesystem::path>& out_dir) {
  const Surface surface = make_surface(spec.surface, spec.seed);
  const CameraScript script = build_script(spec, surface);

  Dataset ds;
  ds.annotations = script.pairs;
  ds.views.reserve(script.cameras.size());
  for (const auto& cam : script.cameras) {
    CameraView view = quantize_depth(render_depth(surface, cam));
    const double frac = static_cast<double>(view.valid_count()) /
                        static_cast<double>(view.intrinsics().pixel_count());
    if (frac < kMinValidFraction) {
      throw ConfigError("view '" + cam.id + "' sees the surface in fewer than 50% of its pixels");
    }
    ds.views.push_back(std::move(view));
  }

  std::vector<PreparedView> prepared;
  prepared.reserve(ds.views.size());
  for (const auto& v : ds.views) prepared.push_back(prepare_view(v, spec.nso));

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < ds.views.size(); ++i) {
    if (spec.self_pairs) pairs.emplace_back(i, i);
    for (std::size_t j = i + 1; j < ds.views.size(); ++j) pairs.emplace_back(i, j);
  }
  ds.records = compute_pairs(prepared, pairs, spec.nso, options.threads, options.oracle);

  if (out_dir) {
    SceneFile scene;
    scene.views = ds.views;
    scene.annotations = ds.annotations;
    nlohmann::json surf = {{"type", surface_type(surface)}};
    if (const auto* hf = std::get_if<HeightfieldSurface>(&surface)) {
      surf["z0"] = hf->z0;
      for (const auto& w : hf->waves) {
        surf["waves"].push_back({{"amplitude", w.amplitude}, {"wx", w.wx}, {"wy", w.wy},
                                 {"phase", w.phase}});
      }
    } else if (const auto* sp = std::get_if<SphereSurface>(&surface)) {
      surf["center"] = {sp->center.x(), sp->center.y(), sp->center.z()};
      surf["radius"] = sp->radius;
    } else {
      surf["z0"] = std::get<PlaneSurface>(surface).z0;
    }
    scene.provenance = {{"generator", "boxoverlap-synth"},
                        {"generator_version", 1},
                        {"seed", spec.seed},
                        {"patterns", spec.patterns},
                        {"surface", surf},
                        {"nso", {{"radius", spec.nso.radius},
                                 {"n_sub", spec.nso.n_sub},
                                 {"weighted", spec.nso.weighted},
                                 {"seed", spec.nso.seed}}}};
    std::error_code ec;
    std::filesystem::create_directories(*out_dir, ec);
    if (ec) throw DataError("cannot create '" + out_dir->string() + "': " + ec.message());
    write_scene(*out_dir, scene);
    write_pairs_csv(*out_dir / "pairs.csv", ds.records);
  }
  return ds;
}

}  // namespace boxoverlap
