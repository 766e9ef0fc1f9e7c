#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "boxoverlap/overlap.hpp"
#include "boxoverlap/trainer.hpp"

namespace boxoverlap::cli {

namespace fs = std::filesystem;

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;

struct GeometryOptions {
  std::optional<double> radius;
  std::optional<std::size_t> n_sub;
  std::optional<std::uint64_t> seed;
  bool unweighted = false;
};

struct SynthArgs {
  fs::path out;
  std::vector<std::string> patterns;
  std::optional<fs::path> config;
  std::optional<std::string> surface;
  std::optional<std::uint64_t> seed;
  std::optional<int> width;
  std::optional<int> height;
  GeometryOptions geometry;
  bool oracle = false;
  bool self_pairs = false;
  unsigned threads = 1;
};

struct NsoArgs {
  fs::path data;
  std::optional<fs::path> pairs;
  std::optional<fs::path> out;
  std::string format = "csv";
  GeometryOptions geometry;
  bool oracle = false;
  bool self_pairs = false;
  unsigned threads = 1;
};

struct TrainArgs {
  fs::path pairs;
  fs::path out;
  std::string model = "box";
  TrainConfig config;
  std::optional<fs::path> resume;
  std::optional<fs::path> loss_trace;
  std::optional<fs::path> export_json;
};

struct EvalArgs {
  fs::path checkpoint;
  fs::path pairs;
  double rho = 5.0;
  std::optional<fs::path> out;
};

struct QueryArgs {
  fs::path checkpoint;
  std::vector<std::string> queries;
  std::size_t k = 10;
  double rho = 5.0;
  bool exclude_self = false;
  std::optional<fs::path> data;  // image sizes for the scale estimate
  std::vector<double> enclosure_range;
  std::vector<double> concentration_range;
  std::optional<fs::path> out;
};

struct ScaleArgs {
  fs::path checkpoint;
  fs::path pairs;
  double rho = 5.0;
  std::optional<fs::path> data;
  std::string format = "jsonl";
  std::optional<fs::path> out;
};

// Each command returns an exit code; library errors propagate as exceptions
// and are mapped to exit codes by the caller.
int cmd_synth(const SynthArgs& args);
int cmd_nso(const NsoArgs& args);
int cmd_train(const TrainArgs& args);
int cmd_eval(const EvalArgs& args);
int cmd_query(const QueryArgs& args);
int cmd_scale(const ScaleArgs& args);

}  // namespace boxoverlap::cli
