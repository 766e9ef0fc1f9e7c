#include "boxoverlap/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "boxoverlap/error.hpp"

namespace boxoverlap {

namespace {

constexpr double kInitCenterStd = 0.1;
constexpr double kInitSizeRaw = 1.0;  // unit-scale extent softplus(1) ~ 1.31
constexpr double kInitVectorStd = 0.1;
constexpr double kAccuracyThreshold = 0.1;

double vector_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return std::sqrt(s);
}

double nbo_flat(std::span<const double> px, std::span<const double> py,
                const SmoothingConfig& cfg) {
  const std::size_t dim = px.size() / 2;
  double value = 1.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double half_x = 0.5 * softplus(px[dim + d]);
    const double half_y = 0.5 * softplus(py[dim + d]);
    const double lo_x = px[d] - half_x, hi_x = px[d] + half_x;
    const double lo_y = py[d] - half_y, hi_y = py[d] + half_y;
    const double extent = sigma(hi_x - lo_x, cfg);
    if (extent <= 0.0) throw GeometryError("degenerate box");  // NaN flows on to the loss check
    value *= sigma(std::min(hi_x, hi_y) - std::max(lo_x, lo_y), cfg) / extent;
  }
  return value;
}

// Inverse of softplus for y > 0.
double softplus_inverse(double y) { return y + std::log(-std::expm1(-y)); }

// Cosine decay from 1 to `floor` over `horizon` steps, then flat at `floor`.
double lr_factor(std::uint64_t step, std::uint64_t horizon, double floor) {
  const double progress =
      std::min(1.0, static_cast<double>(step - 1) / static_cast<double>(std::max<std::uint64_t>(horizon, 1)));
  return floor + (1.0 - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

// Per-step batch generator: the stream depends only on (seed, step).
std::mt19937_64 step_rng(std::uint64_t seed, std::uint64_t step) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

double nso_symmetric(const OverlapRecord& r) { return 0.5 * (r.nso_xy + r.nso_yx); }
double nso_min(const OverlapRecord& r) { return std::min(r.nso_xy, r.nso_yx); }

PairDataset PairDataset::from_records(std::vector<OverlapRecord> records) {
  std::set<std::string> ids;
  for (const auto& r : records) {
    if (!(r.nso_xy >= 0.0 && r.nso_xy <= 1.0 && r.nso_yx >= 0.0 && r.nso_yx <= 1.0)) {
      throw DataError("pair (" + r.id_x + "," + r.id_y + "): overlap outside [0,1]");
    }
    ids.insert(r.id_x);
    ids.insert(r.id_y);
  }
  return {std::move(records), {ids.begin(), ids.end()}};
}

void TrainConfig::validate() const {
  if (dim == 0) throw ConfigError("train: dim must be >= 1");
  if (!(rho > 0.0)) throw ConfigError("train: rho must be > 0");
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning rate must be > 0");
  if (steps == 0) throw ConfigError("train: steps must be >= 1");
  if (batch_size == 0) throw ConfigError("train: batch size must be >= 1");
  if (!(box_scale > 0.0) || !std::isfinite(box_scale)) {
    throw ConfigError("train: box scale must be > 0");
  }
  if (!(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0)) {
    throw ConfigError("train: final learning-rate fraction must be in (0, 1]");
  }
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
    throw ConfigError("train: invalid optimizer coefficients");
  }
}

Prediction predict(const EmbeddingTable& table, std::size_t ix, std::size_t iy,
                   const SmoothingConfig& cfg) {
  const auto px = table.params(ix);
  const auto py = table.params(iy);
  if (table.kind() == ModelKind::kBox) {
    return {nbo_flat(px, py, cfg), nbo_flat(py, px, cfg)};
  }
  const double p = std::clamp(1.0 - vector_distance(px, py), 0.0, 1.0);
  return {p, p};
}

double loss_box(const EmbeddingTable& table, const OverlapRecord& pair,
                const SmoothingConfig& cfg) {
  if (table.kind() != ModelKind::kBox) throw ConfigError("loss_box needs a box table");
  const auto px = table.params(table.index_of(pair.id_x));
  const auto py = table.params(table.index_of(pair.id_y));
  const double exy = pair.nso_xy - nbo_flat(px, py, cfg);
  const double eyx = pair.nso_yx - nbo_flat(py, px, cfg);
  return exy * exy + eyx * eyx;
}

double loss_vector(const EmbeddingTable& table, const OverlapRecord& pair) {
  if (table.kind() != ModelKind::kVector) throw ConfigError("loss_vector needs a vector table");
  const auto fx = table.params(table.index_of(pair.id_x));
  const auto fy = table.params(table.index_of(pair.id_y));
  const double e = (1.0 - nso_symmetric(pair)) - vector_distance(fx, fy);
  return e * e;
}

double loss_with_gradient(const EmbeddingTable& table, const OverlapRecord& pair,
                          const SmoothingConfig& cfg, double scale, std::span<double> grad) {
  const std::size_t ix = table.index_of(pair.id_x);
  const std::size_t iy = table.index_of(pair.id_y);
  const std::size_t stride = table.params_per_entry();
  const auto px = table.params(ix);
  const auto py = table.params(iy);
  auto gx = grad.subspan(ix * stride, stride);
  auto gy = grad.subspan(iy * stride, stride);

  if (table.kind() == ModelKind::kBox) {
    const double exy = pair.nso_xy - nbo_flat(px, py, cfg);
    const double eyx = pair.nso_yx - nbo_flat(py, px, cfg);
    nbo_with_gradient(px, py, cfg, -2.0 * exy * scale, gx, gy);
    nbo_with_gradient(py, px, cfg, -2.0 * eyx * scale, gy, gx);
    return exy * exy + eyx * eyx;
  }

  const double dist = vector_distance(px, py);
  const double e = (1.0 - nso_symmetric(pair)) - dist;
  if (dist > 0.0) {
    const double k = -2.0 * e * scale / dist;
    for (std::size_t d = 0; d < stride; ++d) {
      const double g = k * (px[d] - py[d]);
      gx[d] += g;
      gy[d] -= g;
    }
  }
  return e * e;
}

EmbeddingTable init_table(const PairDataset& data, const TrainConfig& cfg, ModelKind kind) {
  EmbeddingTable table(kind, cfg.dim);
  std::mt19937_64 rng(cfg.seed);
  const bool box = kind == ModelKind::kBox;
  const double std_dev = box ? kInitCenterStd * cfg.box_scale : kInitVectorStd;
  const double size_raw = softplus_inverse(softplus(kInitSizeRaw) * cfg.box_scale);
  std::normal_distribution<double> normal(0.0, std_dev);
  std::vector<double> entry(table.params_per_entry());
  for (const auto& id : data.ids) {
    for (std::size_t d = 0; d < cfg.dim; ++d) entry[d] = normal(rng);
    if (kind == ModelKind::kBox) {
      std::fill(entry.begin() + cfg.dim, entry.end(), size_raw);
    }
    table.add(id, entry);
  }
  return table;
}

TrainResult train(const PairDataset& data, const TrainConfig& cfg, ModelKind kind,
                  const Checkpoint* resume) {
  cfg.validate();
  if (data.pairs.empty()) throw ConfigError("train: dataset has no pairs");

  TrainResult result;
  Checkpoint& ck = result.checkpoint;
  if (resume != nullptr) {
    ck = *resume;
    if (ck.table.kind() != kind || ck.table.dim() != cfg.dim) {
      throw ConfigError("train: checkpoint kind/dim does not match the configuration");
    }
    for (const auto& id : data.ids) ck.table.index_of(id);
  } else {
    ck.table = init_table(data, cfg, kind);
  }
  const std::size_t n_params = ck.table.flat().size();
  if (ck.optimizer.first_moment.size() != n_params) {
    ck.optimizer.first_moment.assign(n_params, 0.0);
    ck.optimizer.second_moment.assign(n_params, 0.0);
    ck.optimizer.step = 0;
  }
  if (resume == nullptr || ck.optimizer.horizon == 0 || cfg.schedule_steps != 0) {
    ck.optimizer.horizon =
        cfg.schedule_steps != 0 ? cfg.schedule_steps : ck.optimizer.step + cfg.steps;
  }
  const double base_lr =
      cfg.learning_rate * (kind == ModelKind::kBox ? cfg.box_scale : 1.0);

  const SmoothingConfig smoothing = cfg.smoothing();
  std::vector<double> grad(n_params);
  std::vector<std::size_t> batch(cfg.batch_size);
  result.loss_trace.reserve(cfg.steps);
  auto params = ck.table.flat();
  auto& m = ck.optimizer.first_moment;
  auto& v = ck.optimizer.second_moment;
  const double scale = 1.0 / static_cast<double>(cfg.batch_size);

  for (std::size_t s = 0; s < cfg.steps; ++s) {
    const std::uint64_t step = ck.optimizer.step + 1;
    auto rng = step_rng(cfg.seed, step);
    std::uniform_int_distribution<std::size_t> pick(0, data.pairs.size() - 1);
    for (auto& b : batch) b = pick(rng);

    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (std::size_t b : batch) {
      const double l = loss_with_gradient(ck.table, data.pairs[b], smoothing, scale, grad);
      if (!std::isfinite(l)) {
        std::ostringstream msg;
        msg << "non-finite loss at step " << step << " on pair (" << data.pairs[b].id_x << ","
            << data.pairs[b].id_y << ")";
        throw TrainingError(msg.str());
      }
      loss += l;
    }
    loss *= scale;

    const double lr = base_lr * lr_factor(step, ck.optimizer.horizon, cfg.final_lr_fraction);
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < n_params; ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
      params[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.epsilon);
    }
    ck.optimizer.step = step;
    result.loss_trace.push_back(loss);
  }
  return result;
}

Metrics evaluate_predictions(std::span<const OverlapRecord> truth,
                             std::span<const Prediction> predicted) {
  if (truth.empty()) throw ConfigError("evaluate: empty test set");
  if (truth.size() != predicted.size()) throw ConfigError("evaluate: size mismatch");
  double l1 = 0.0, sq = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double exy = std::abs(truth[i].nso_xy - predicted[i].xy);
    const double eyx = std::abs(truth[i].nso_yx - predicted[i].yx);
    l1 += exy + eyx;
    sq += exy * exy + eyx * eyx;
    hits += (exy < kAccuracyThreshold ? 1 : 0) + (eyx < kAccuracyThreshold ? 1 : 0);
  }
  const auto n = static_cast<double>(truth.size());
  return {l1 / n, std::sqrt(sq / n), static_cast<double>(hits) / (2.0 * n), truth.size()};
}

Metrics evaluate(const EmbeddingTable& table, std::span<const OverlapRecord> pairs,
                 const SmoothingConfig& cfg) {
  std::vector<Prediction> pred;
  pred.reserve(pairs.size());
  for (const auto& r : pairs) {
    pred.push_back(predict(table, table.index_of(r.id_x), table.index_of(r.id_y), cfg));
  }
  return evaluate_predictions(pairs, pred);
}

}  // namespace boxoverlap
