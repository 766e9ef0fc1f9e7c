#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "boxoverlap/camera.hpp"
#include "boxoverlap/overlap.hpp"
#include "boxoverlap/synth.hpp"
#include "boxoverlap/trainer.hpp"

namespace boxoverlap {

namespace fs = std::filesystem;

// Depth raster: "DPTH", u32 width, u32 height, u32 reserved, then
// width*height little-endian float32 values, row-major, NaN = invalid.
struct DepthRaster {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<float> values;
};

void write_depth(const fs::path& path, const DepthRaster& raster);
DepthRaster read_depth(const fs::path& path);
DepthRaster to_raster(const CameraView& view);
// Rounds every depth to float32, the precision stored on disk.
CameraView quantize_depth(const CameraView& view);

struct SceneFile {
  std::vector<CameraView> views;
  std::vector<PairAnnotation> annotations;
  nlohmann::json provenance;
};

// Writes scene.json plus one "<id>.dpth" raster per view.
void write_scene(const fs::path& dir, const SceneFile& scene);
// Throws DataError naming the offending field for malformed scene.json.
SceneFile read_scene(const fs::path& dir);

// CSV "id_x,id_y,nso_xy,nso_yx".
void write_pairs_csv(std::ostream& out, const std::vector<OverlapRecord>& records);
void write_pairs_csv(const fs::path& path, const std::vector<OverlapRecord>& records);
std::vector<OverlapRecord> read_pairs_csv(const fs::path& path);
// First two columns of a CSV (header optional when it starts with "id_x").
std::vector<std::pair<std::string, std::string>> read_pair_requests(const fs::path& path);

// Binary checkpoint:
//   "BOXT", u32 version, u32 kind (0 box, 1 vector), u32 D, u32 count, u64 step,
//   u64 schedule horizon
//   per entry: u32 id length, id bytes, u32 D,
//     box: 2D f64 (lower then upper), 2D f64 (center then size_raw)
//     vector: D f64
//   u8 has optimizer state; if set, the Adam first then second moments laid
//   out like the parameters (f64 each).
void write_checkpoint(const fs::path& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const fs::path& path);

nlohmann::json table_to_json(const EmbeddingTable& table);

// CSV "step,loss".
void write_loss_trace(const fs::path& path, const std::vector<double>& trace,
                      std::uint64_t first_step = 1);

nlohmann::json metrics_to_json(const Metrics& m);

}  // namespace boxoverlap
