#include "boxoverlap/io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "boxoverlap/error.hpp"

namespace boxoverlap {

static_assert(std::endian::native == std::endian::little, "binary formats assume little-endian");

namespace {

constexpr char kDepthMagic[4] = {'D', 'P', 'T', 'H'};
constexpr char kCheckpointMagic[4] = {'B', 'O', 'X', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  return in;
}

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const fs::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw DataError("'" + path.string() + "': truncated file");
  }
  return v;
}

void put_doubles(std::ostream& out, std::span<const double> v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()));
}

void get_doubles(std::istream& in, std::span<double> v, const fs::path& path) {
  if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()))) {
    throw DataError("'" + path.string() + "': truncated file");
  }
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Fetches scene.json field `key` of `obj`, naming it in the error.
template <typename T>
T field(const nlohmann::json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw DataError("scene.json: " + where + " is missing field '" + key + "'");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DataError("scene.json: " + where + " has a malformed field '" + key + "'");
  }
}

Relation parse_relation(const std::string& s) {
  for (Relation r : {Relation::kZoomIn, Relation::kZoomOut, Relation::kCloneLike,
                     Relation::kObliqueOrCropOut, Relation::kUnrelated}) {
    if (to_string(r) == s) return r;
  }
  throw DataError("scene.json: unknown relation '" + s + "'");
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string strip(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && s[b] == ' ') ++b;
  return s.substr(b);
}

double parse_double(const std::string& s, const fs::path& path, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw DataError("'" + path.string() + "' line " + std::to_string(line) + ": bad number '" + s + "'");
}

}  // namespace

void write_depth(const fs::path& path, const DepthRaster& raster) {
  if (raster.values.size() != static_cast<std::size_t>(raster.width) * raster.height) {
    throw DataError("depth raster size does not match its dimensions");
  }
  auto out = open_out(path, std::ios::binary);
  out.write(kDepthMagic, 4);
  put<std::uint32_t>(out, raster.width);
  put<std::uint32_t>(out, raster.height);
  put<std::uint32_t>(out, 0);
  out.write(reinterpret_cast<const char*>(raster.values.data()),
            static_cast<std::streamsize>(raster.values.size() * sizeof(float)));
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

DepthRaster read_depth(const fs::path& path) {
  auto in = open_in(path, std::ios::binary);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kDepthMagic, 4) != 0) {
    throw DataError("'" + path.string() + "': not a DPTH raster");
  }
  DepthRaster r;
  r.width = get<std::uint32_t>(in, path);
  r.height = get<std::uint32_t>(in, path);
  (void)get<std::uint32_t>(in, path);
  r.values.resize(static_cast<std::size_t>(r.width) * r.height);
  if (!in.read(reinterpret_cast<char*>(r.values.data()),
               static_cast<std::streamsize>(r.values.size() * sizeof(float)))) {
    throw DataError("'" + path.string() + "': truncated depth raster");
  }
  return r;
}

DepthRaster to_raster(const CameraView& view) {
  DepthRaster r{static_cast<std::uint32_t>(view.width()), static_cast<std::uint32_t>(view.height()),
                {}};
  r.values.reserve(view.depth().size());
  for (double d : view.depth()) {
    r.values.push_back(std::isfinite(d) && d > 0.0 ? static_cast<float>(d)
                                                   : std::numeric_limits<float>::quiet_NaN());
  }
  return r;
}

CameraView quantize_depth(const CameraView& view) {
  const DepthRaster r = to_raster(view);
  std::vector<double> depth(r.values.begin(), r.values.end());
  return CameraView(view.id(), view.intrinsics(), view.pose(), std::move(depth));
}

void write_scene(const fs::path& dir, const SceneFile& scene) {
  nlohmann::json views = nlohmann::json::array();
  for (const auto& v : scene.views) {
    const auto& k = v.intrinsics();
    const auto& p = v.pose();
    std::vector<double> rot;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) rot.push_back(p.rotation(r, c));
    }
    const std::string depth_file = v.id() + ".dpth";
    views.push_back({{"id", v.id()},
                     {"fx", k.fx},
                     {"fy", k.fy},
                     {"cx", k.cx},
                     {"cy", k.cy},
                     {"width", k.width},
                     {"height", k.height},
                     {"rotation", rot},
                     {"translation", {p.translation.x(), p.translation.y(), p.translation.z()}},
                     {"depth_file", depth_file}});
    write_depth(dir / depth_file, to_raster(v));
  }
  nlohmann::json annotations = nlohmann::json::array();
  for (const auto& a : scene.annotations) {
    annotations.push_back({{"pattern", a.pattern},
                           {"parameter", a.parameter},
                           {"id_x", a.id_x},
                           {"id_y", a.id_y},
                           {"expected_xy", {a.expected_xy.lo, a.expected_xy.hi}},
                           {"expected_yx", {a.expected_yx.lo, a.expected_yx.hi}},
                           {"relation", std::string(to_string(a.relation))}});
  }
  nlohmann::json doc = {{"views", views}, {"annotations", annotations}};
  if (!scene.provenance.is_null()) doc["provenance"] = scene.provenance;
  auto out = open_out(dir / "scene.json");
  out << doc.dump(2) << '\n';
  if (!out) throw DataError("write failed for '" + (dir / "scene.json").string() + "'");
}

SceneFile read_scene(const fs::path& dir) {
  const fs::path path = dir / "scene.json";
  nlohmann::json doc;
  {
    auto in = open_in(path);
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("scene.json: not valid JSON (" + std::string(e.what()) + ")");
    }
  }
  SceneFile scene;
  const auto views = field<nlohmann::json>(doc, "views", "document");
  if (!views.is_array()) throw DataError("scene.json: field 'views' is not a list");
  for (std::size_t i = 0; i < views.size(); ++i) {
    const auto& v = views[i];
    const std::string where = "views[" + std::to_string(i) + "]";
    const auto id = field<std::string>(v, "id", where);
    CameraIntrinsics k{field<double>(v, "fx", where),   field<double>(v, "fy", where),
                       field<double>(v, "cx", where),   field<double>(v, "cy", where),
                       field<int>(v, "width", where), field<int>(v, "height", where)};
    const auto rot = field<std::vector<double>>(v, "rotation", where);
    if (rot.size() != 9) throw DataError("scene.json: " + where + " field 'rotation' needs 9 values");
    const auto tr = field<std::vector<double>>(v, "translation", where);
    if (tr.size() != 3) {
      throw DataError("scene.json: " + where + " field 'translation' needs 3 values");
    }
    Pose pose;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) pose.rotation(r, c) = rot[r * 3 + c];
    }
    pose.translation = Eigen::Vector3d(tr[0], tr[1], tr[2]);
    const auto depth_file = field<std::string>(v, "depth_file", where);
    const DepthRaster raster = read_depth(dir / depth_file);
    if (static_cast<int>(raster.width) != k.width || static_cast<int>(raster.height) != k.height) {
      throw DataError("scene.json: " + where + " size differs from '" + depth_file + "'");
    }
    std::vector<double> depth(raster.values.begin(), raster.values.end());
    try {
      scene.views.emplace_back(id, k, pose, std::move(depth));
    } catch (const Error& e) {
      throw DataError("scene.json: " + where + ": " + e.what());
    }
  }
  if (doc.contains("annotations")) {
    const auto& anns = doc.at("annotations");
    for (std::size_t i = 0; i < anns.size(); ++i) {
      const auto& a = anns[i];
      const std::string where = "annotations[" + std::to_string(i) + "]";
      const auto xy = field<std::vector<double>>(a, "expected_xy", where);
      const auto yx = field<std::vector<double>>(a, "expected_yx", where);
      if (xy.size() != 2 || yx.size() != 2) {
        throw DataError("scene.json: " + where + " intervals need 2 values");
      }
      scene.annotations.push_back({field<std::string>(a, "pattern", where),
                                   field<double>(a, "parameter", where),
                                   field<std::string>(a, "id_x", where),
                                   field<std::string>(a, "id_y", where),
                                   {xy[0], xy[1]},
                                   {yx[0], yx[1]},
                                   parse_relation(field<std::string>(a, "relation", where))});
    }
  }
  if (doc.contains("provenance")) scene.provenance = doc.at("provenance");
  return scene;
}

void write_pairs_csv(std::ostream& out, const std::vector<OverlapRecord>& records) {
  out << "id_x,id_y,nso_xy,nso_yx\n";
  for (const auto& r : records) {
    out << r.id_x << ',' << r.id_y << ',' << format_double(r.nso_xy) << ','
        << format_double(r.nso_yx) << '\n';
  }
}

void write_pairs_csv(const fs::path& path, const std::vector<OverlapRecord>& records) {
  auto out = open_out(path);
  write_pairs_csv(out, records);
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

std::vector<OverlapRecord> read_pairs_csv(const fs::path& path) {
  auto in = open_in(path);
  std::vector<OverlapRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    line = strip(line);
    if (line.empty()) continue;
    if (n == 1 && line.rfind("id_x", 0) == 0) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 4) {
      throw DataError("'" + path.string() + "' line " + std::to_string(n) + ": expected 4 columns");
    }
    out.push_back({strip(cells[0]), strip(cells[1]), parse_double(strip(cells[2]), path, n),
                   parse_double(strip(cells[3]), path, n)});
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> read_pair_requests(const fs::path& path) {
  auto in = open_in(path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    line = strip(line);
    if (line.empty()) continue;
    if (n == 1 && line.rfind("id_x", 0) == 0) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() < 2) {
      throw DataError("'" + path.string() + "' line " + std::to_string(n) + ": expected 2 ids");
    }
    out.emplace_back(strip(cells[0]), strip(cells[1]));
  }
  return out;
}

void write_checkpoint(const fs::path& path, const Checkpoint& ck) {
  const auto& t = ck.table;
  auto out = open_out(path, std::ios::binary);
  out.write(kCheckpointMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, t.kind() == ModelKind::kBox ? 0u : 1u);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dim()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.size()));
  put<std::uint64_t>(out, ck.optimizer.step);
  put<std::uint64_t>(out, ck.optimizer.horizon);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const std::string& id = t.ids()[i];
    put<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dim()));
    if (t.kind() == ModelKind::kBox) {
      const BoxEmbedding b = t.box(i);
      put_doubles(out, std::span<const double>(b.lower.data(), b.lower.size()));
      put_doubles(out, std::span<const double>(b.upper.data(), b.upper.size()));
    }
    put_doubles(out, t.params(i));
  }
  const bool has_opt = !ck.optimizer.first_moment.empty();
  put<std::uint8_t>(out, has_opt ? 1 : 0);
  if (has_opt) {
    put_doubles(out, ck.optimizer.first_moment);
    put_doubles(out, ck.optimizer.second_moment);
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

Checkpoint read_checkpoint(const fs::path& path) {
  auto in = open_in(path, std::ios::binary);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw DataError("'" + path.string() + "': not a checkpoint");
  }
  if (get<std::uint32_t>(in, path) != kCheckpointVersion) {
    throw DataError("'" + path.string() + "': unsupported checkpoint version");
  }
  const auto kind_code = get<std::uint32_t>(in, path);
  if (kind_code > 1) throw DataError("'" + path.string() + "': unknown model kind");
  const ModelKind kind = kind_code == 0 ? ModelKind::kBox : ModelKind::kVector;
  const std::size_t dim = get<std::uint32_t>(in, path);
  const std::size_t count = get<std::uint32_t>(in, path);
  Checkpoint ck;
  ck.optimizer.step = get<std::uint64_t>(in, path);
  ck.optimizer.horizon = get<std::uint64_t>(in, path);
  ck.table = EmbeddingTable(kind, dim);
  std::vector<double> params(ck.table.params_per_entry());
  std::vector<double> corners(2 * dim);
  for (std::size_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(in, path);
    std::string id(len, '\0');
    if (!in.read(id.data(), len)) throw DataError("'" + path.string() + "': truncated file");
    if (get<std::uint32_t>(in, path) != dim) {
      throw DataError("'" + path.string() + "': entry '" + id + "' has the wrong dimension");
    }
    if (kind == ModelKind::kBox) get_doubles(in, corners, path);
    get_doubles(in, params, path);
    ck.table.add(id, params);
  }
  if (get<std::uint8_t>(in, path) != 0) {
    const std::size_t n = ck.table.flat().size();
    ck.optimizer.first_moment.resize(n);
    ck.optimizer.second_moment.resize(n);
    get_doubles(in, ck.optimizer.first_moment, path);
    get_doubles(in, ck.optimizer.second_moment, path);
  }
  return ck;
}

nlohmann::json table_to_json(const EmbeddingTable& table) {
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t i = 0; i < table.size(); ++i) {
    nlohmann::json e = {{"id", table.ids()[i]}};
    if (table.kind() == ModelKind::kBox) {
      const BoxEmbedding b = table.box(i);
      e["lower"] = std::vector<double>(b.lower.data(), b.lower.data() + b.lower.size());
      e["upper"] = std::vector<double>(b.upper.data(), b.upper.data() + b.upper.size());
    } else {
      const auto p = table.params(i);
      e["vector"] = std::vector<double>(p.begin(), p.end());
    }
    entries.push_back(std::move(e));
  }
  return {{"kind", std::string(to_string(table.kind()))}, {"dim", table.dim()}, {"entries", entries}};
}

void write_loss_trace(const fs::path& path, const std::vector<double>& trace,
                      std::uint64_t first_step) {
  auto out = open_out(path);
  out << "step,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out << first_step + i << ',' << format_double(trace[i]) << '\n';
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

nlohmann::json metrics_to_json(const Metrics& m) {
  nlohmann::json j;
  j["l1_norm"] = m.l1_norm;
  j["rmse"] = m.rmse;
  j["acc_at_0.1"] = m.acc_at_0_1;
  j["n_pairs"] = m.n_pairs;
  return j;
}

}  // namespace boxoverlap
