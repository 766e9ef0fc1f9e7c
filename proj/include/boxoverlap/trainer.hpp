#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "boxoverlap/box.hpp"
#include "boxoverlap/embedding_table.hpp"
#include "boxoverlap/overlap.hpp"

namespace boxoverlap {

double nso_symmetric(const OverlapRecord& r);
double nso_min(const OverlapRecord& r);

// Training pairs plus the sorted set of ids they reference.
struct PairDataset {
  std::vector<OverlapRecord> pairs;
  std::vector<std::string> ids;

  // Throws DataError when an NSO value is outside [0, 1].
  static PairDataset from_records(std::vector<OverlapRecord> records);
};

struct TrainConfig {
  std::size_t dim = 32;
  double rho = 5.0;
  double learning_rate = 1e-2;
  // Box coordinates are initialized and stepped in units of box_scale: centers
  // ~ N(0, (0.1 s)^2), extents softplus(1) s, Adam step learning_rate * s.
  double box_scale = 50.0;
  // Cosine decay of the step size down to this fraction over the schedule.
  double final_lr_fraction = 0.01;
  // Schedule length; 0 means "this run's steps" (resumed runs keep the stored one).
  std::size_t schedule_steps = 0;
  std::size_t steps = 20000;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
  SmoothingConfig smoothing() const { return {rho}; }
};

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;
  std::uint64_t horizon = 0;  // learning-rate schedule length
};

struct Checkpoint {
  EmbeddingTable table;
  AdamState optimizer;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> loss_trace;  // mean batch loss per step
};

// Predicted directed overlaps. Vector tables predict clamp(1 - |f(x)-f(y)|, 0, 1)
// in both directions.
struct Prediction {
  double xy = 0.0;
  double yx = 0.0;
};

Prediction predict(const EmbeddingTable& table, std::size_t ix, std::size_t iy,
                   const SmoothingConfig& cfg);

// (NSO(x->y) - NBO(x->y))^2 + (NSO(y->x) - NBO(y->x))^2.
double loss_box(const EmbeddingTable& table, const OverlapRecord& pair,
                const SmoothingConfig& cfg);
// ((1 - NSO_sym) - |f(x) - f(y)|)^2.
double loss_vector(const EmbeddingTable& table, const OverlapRecord& pair);

// Loss of one pair with its gradient accumulated (times `scale`) into `grad`,
// which is laid out like table.flat().
double loss_with_gradient(const EmbeddingTable& table, const OverlapRecord& pair,
                          const SmoothingConfig& cfg, double scale, std::span<double> grad);

EmbeddingTable init_table(const PairDataset& data, const TrainConfig& cfg, ModelKind kind);

// Minibatch Adam on the mean pair loss. Deterministic in cfg.seed; resuming
// from a checkpoint continues the exact same sample stream. Throws
// TrainingError on a non-finite loss.
TrainResult train(const PairDataset& data, const TrainConfig& cfg, ModelKind kind,
                  const Checkpoint* resume = nullptr);

struct Metrics {
  double l1_norm = 0.0;
  double rmse = 0.0;
  double acc_at_0_1 = 0.0;  // fraction of directed overlaps with |error| < 0.1
  std::size_t n_pairs = 0;
};

Metrics evaluate_predictions(std::span<const OverlapRecord> truth,
                             std::span<const Prediction> predicted);
Metrics evaluate(const EmbeddingTable& table, std::span<const OverlapRecord> pairs,
                 const SmoothingConfig& cfg);

}  // namespace boxoverlap
