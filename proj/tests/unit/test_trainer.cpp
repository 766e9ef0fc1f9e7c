#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "boxoverlap/error.hpp"
#include "boxoverlap/synth.hpp"
#include "boxoverlap/trainer.hpp"

namespace boxoverlap {
namespace {

EmbeddingTable box_table(const std::vector<std::pair<std::string, std::vector<double>>>& entries,
                         std::size_t dim) {
  EmbeddingTable t(ModelKind::kBox, dim);
  for (const auto& [id, p] : entries) t.add(id, p);
  return t;
}

double mean_loss(const EmbeddingTable& t, const std::vector<OverlapRecord>& pairs,
                 const SmoothingConfig& cfg) {
  double s = 0.0;
  for (const auto& p : pairs) {
    s += t.kind() == ModelKind::kBox ? loss_box(t, p, cfg) : loss_vector(t, p);
  }
  return s / static_cast<double>(pairs.size());
}

TEST(NsoSummaries, Values) {
  EXPECT_DOUBLE_EQ(nso_symmetric({"x", "y", 0.71, 0.04}), 0.375);
  EXPECT_DOUBLE_EQ(nso_min({"x", "y", 0.71, 0.04}), 0.04);
  EXPECT_EQ(nso_symmetric({"x", "y", 1, 1}), 1.0);
  EXPECT_EQ(nso_min({"x", "y", 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(nso_symmetric({"x", "y", 0.8, 0.2}), 0.5);
  EXPECT_DOUBLE_EQ(nso_min({"x", "y", 0.8, 0.2}), 0.2);
}

TEST(LossBox, HandValues) {
  const auto t = box_table({{"a", {0, 0, 1, 1}}, {"b", {0, 0, 1, 1}}}, 2);
  const SmoothingConfig cfg{5.0};
  EXPECT_EQ(loss_box(t, {"a", "b", 1, 1}, cfg), 0.0);
  EXPECT_EQ(loss_box(t, {"a", "b", 0.5, 0.5}, SmoothingConfig{1e-6}), 0.5);
  // Perfect prediction of a non-trivial pair.
  const auto u = box_table({{"a", {0, 3}}, {"b", {0.7, 1.2}}}, 1);
  const Prediction p = predict(u, 0, 1, cfg);
  EXPECT_EQ(loss_box(u, {"a", "b", p.xy, p.yx}, cfg), 0.0);
  EXPECT_GT(loss_box(u, {"a", "b", p.xy, p.yx > 0.5 ? p.yx - 0.1 : p.yx + 0.1}, cfg), 0.0);
}

TEST(LossVector, HandValues) {
  EmbeddingTable t(ModelKind::kVector, 2);
  t.add("a", std::vector<double>{0, 0});
  t.add("b", std::vector<double>{0, 0});
  t.add("c", std::vector<double>{0.6, 0.8});
  EXPECT_EQ(loss_vector(t, {"a", "b", 1, 1}), 0.0);
  EXPECT_NEAR(loss_vector(t, {"a", "c", 0, 0}), 0.0, 1e-30);
  EXPECT_EQ(loss_vector(t, {"a", "b", 0.5, 0.5}), 0.25);
  EXPECT_THROW(loss_box(t, {"a", "b", 1, 1}, {}), ConfigError);
}

TEST(LossGradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 2.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (ModelKind kind : {ModelKind::kBox, ModelKind::kVector}) {
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      EmbeddingTable t(kind, 8);
      std::vector<double> p(t.params_per_entry());
      for (const char* id : {"a", "b"}) {
        for (auto& v : p) v = g(rng);
        t.add(id, p);
      }
      const OverlapRecord pair{"a", "b", u(rng), u(rng)};
      const SmoothingConfig cfg{5.0};
      std::vector<double> grad(t.flat().size(), 0.0);
      loss_with_gradient(t, pair, cfg, 1.0, grad);
      auto loss = [&] { return kind == ModelKind::kBox ? loss_box(t, pair, cfg) : loss_vector(t, pair); };
      for (std::size_t i = 0; i < grad.size(); ++i) {
        const double h = 1e-5, keep = t.flat()[i];
        t.flat()[i] = keep + h;
        const double lp = loss();
        t.flat()[i] = keep - h;
        const double lm = loss();
        t.flat()[i] = keep;
        const double fd = (lp - lm) / (2 * h);
        worst = std::max(worst, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-6}));
      }
    }
    EXPECT_LT(worst, 1e-4) << to_string(kind);
  }
}

TEST(Evaluate, PerfectAndConstantErrors) {
  const std::vector<OverlapRecord> truth{{"a", "b", 0.3, 0.9}, {"a", "c", 0.0, 0.5}};
  const std::vector<Prediction> exact{{0.3, 0.9}, {0.0, 0.5}};
  const Metrics m0 = evaluate_predictions(truth, exact);
  EXPECT_EQ(m0.l1_norm, 0.0);
  EXPECT_EQ(m0.rmse, 0.0);
  EXPECT_EQ(m0.acc_at_0_1, 1.0);
  EXPECT_EQ(m0.n_pairs, 2u);

  const std::vector<Prediction> off{{0.5, 0.7}, {0.2, 0.3}};
  const Metrics m = evaluate_predictions(truth, off);
  EXPECT_NEAR(m.l1_norm, 0.4, 1e-12);
  EXPECT_NEAR(m.rmse, 0.2 * std::sqrt(2.0), 1e-12);
  EXPECT_EQ(m.acc_at_0_1, 0.0);
}

TEST(Evaluate, EmptyAndMismatchedRejected) {
  EXPECT_THROW(evaluate_predictions({}, {}), ConfigError);
  const std::vector<OverlapRecord> truth{{"a", "b", 0.3, 0.9}};
  EXPECT_THROW(evaluate_predictions(truth, {}), ConfigError);
}

TEST(PairDataset, RejectsOutOfRangeOverlap) {
  EXPECT_THROW(PairDataset::from_records({{"a", "b", 1.5, 0.2}}), DataError);
  EXPECT_THROW(PairDataset::from_records({{"a", "b", std::nan(""), 0.2}}), DataError);
  const auto d = PairDataset::from_records({{"b", "a", 0.5, 0.2}, {"c", "a", 0, 0}});
  EXPECT_EQ(d.ids, (std::vector<std::string>{"a", "b", "c"}));
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.steps = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.rho = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.learning_rate = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Train, CoincidentPairAndDisjointThird) {
  const auto data = PairDataset::from_records({{"a", "b", 1, 1}, {"a", "c", 0, 0}, {"b", "c", 0, 0}});
  TrainConfig cfg;
  cfg.steps = 5000;
  cfg.seed = 3;
  const TrainResult r = train(data, cfg, ModelKind::kBox);
  EXPECT_LT(mean_loss(r.checkpoint.table, data.pairs, cfg.smoothing()), 1e-3);
  EXPECT_EQ(r.loss_trace.size(), 5000u);
}

TEST(Train, SelfPairStaysExact) {
  const auto data = PairDataset::from_records({{"a", "a", 1, 1}});
  TrainConfig cfg;
  cfg.steps = 500;
  const TrainResult r = train(data, cfg, ModelKind::kBox);
  EXPECT_LT(mean_loss(r.checkpoint.table, data.pairs, cfg.smoothing()), 1e-6);
  for (double l : r.loss_trace) EXPECT_LT(l, 1e-6);
}

TEST(Train, AsymmetricPairBoxFitsVectorHitsSymmetricFloor) {
  const auto data = PairDataset::from_records({{"a", "b", 1.0, 0.25}});
  TrainConfig cfg;
  cfg.steps = 5000;
  const TrainResult box = train(data, cfg, ModelKind::kBox);
  EXPECT_LT(mean_loss(box.checkpoint.table, data.pairs, cfg.smoothing()), 1e-3);
  const Prediction pb = predict(box.checkpoint.table, 0, 1, cfg.smoothing());
  EXPECT_LT(std::abs(pb.xy - 1.0) + std::abs(pb.yx - 0.25), 0.75);

  const TrainResult vec = train(data, cfg, ModelKind::kVector);
  const Prediction pv = predict(vec.checkpoint.table, 0, 1, cfg.smoothing());
  const double l1 = std::abs(pv.xy - 1.0) + std::abs(pv.yx - 0.25);
  EXPECT_GE(l1, 0.75 - 1e-12);  // |p - q| floor of any symmetric predictor
  EXPECT_LT(l1, 0.75 + 0.05);
}

TEST(Train, DeterministicAndResumable) {
  const auto data = PairDataset::from_records(
      {{"a", "b", 0.6, 0.3}, {"b", "c", 0.1, 0.9}, {"a", "c", 0.0, 0.0}, {"c", "d", 0.5, 0.5}});
  TrainConfig cfg;
  cfg.dim = 4;
  cfg.steps = 300;
  cfg.seed = 11;
  const TrainResult a = train(data, cfg, ModelKind::kBox);
  const TrainResult b = train(data, cfg, ModelKind::kBox);
  EXPECT_TRUE(std::equal(a.checkpoint.table.flat().begin(), a.checkpoint.table.flat().end(),
                         b.checkpoint.table.flat().begin()));
  EXPECT_EQ(a.loss_trace, b.loss_trace);

  TrainConfig first = cfg;
  first.steps = 120;
  first.schedule_steps = 300;
  const TrainResult part = train(data, first, ModelKind::kBox);
  TrainConfig rest = cfg;
  rest.steps = 180;
  const TrainResult resumed = train(data, rest, ModelKind::kBox, &part.checkpoint);
  EXPECT_TRUE(std::equal(a.checkpoint.table.flat().begin(), a.checkpoint.table.flat().end(),
                         resumed.checkpoint.table.flat().begin()));
  EXPECT_EQ(resumed.checkpoint.optimizer.step, 300u);
  std::vector<double> joined = part.loss_trace;
  joined.insert(joined.end(), resumed.loss_trace.begin(), resumed.loss_trace.end());
  EXPECT_EQ(joined, a.loss_trace);
}

TEST(Train, ResumeRejectsMismatchedCheckpoint) {
  const auto data = PairDataset::from_records({{"a", "b", 0.6, 0.3}});
  TrainConfig cfg;
  cfg.steps = 10;
  const TrainResult r = train(data, cfg, ModelKind::kBox);
  EXPECT_THROW(train(data, cfg, ModelKind::kVector, &r.checkpoint), ConfigError);
  const auto other = PairDataset::from_records({{"a", "z", 0.6, 0.3}});
  EXPECT_THROW(train(other, cfg, ModelKind::kBox, &r.checkpoint), ConfigError);
}

TEST(Train, NonFiniteLossReportsStepAndPair) {
  const auto data = PairDataset::from_records({{"a", "b", 0.6, 0.3}});
  TrainConfig cfg;
  cfg.dim = 2;
  cfg.steps = 5;
  Checkpoint ck;
  ck.table = EmbeddingTable(ModelKind::kBox, 2);
  ck.table.add("a", std::vector<double>{std::numeric_limits<double>::quiet_NaN(), 0, 0, 0});
  ck.table.add("b", std::vector<double>{0, 0, 0, 0});
  try {
    train(data, cfg, ModelKind::kBox, &ck);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("step 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("(a,b)"), std::string::npos) << msg;
  }
}

TEST(Train, LossTraceFiniteOnSyntheticGrid) {
  DatasetSpec spec;
  spec.patterns = {"grid:3", "zoom:2"};
  const Dataset ds = generate_dataset(spec, {}, std::nullopt);
  const auto data = PairDataset::from_records(ds.records);
  TrainConfig cfg;
  cfg.steps = 2000;
  const TrainResult r = train(data, cfg, ModelKind::kBox);
  for (double l : r.loss_trace) ASSERT_TRUE(std::isfinite(l));
  const Metrics m = evaluate(r.checkpoint.table, data.pairs, cfg.smoothing());
  EXPECT_GT(m.acc_at_0_1, 0.9);
}

TEST(InitTable, HeavilyOverlappingBoxes) {
  const auto data = PairDataset::from_records({{"a", "b", 0.5, 0.5}, {"c", "d", 0.5, 0.5}});
  TrainConfig cfg;
  cfg.dim = 2;
  const EmbeddingTable t = init_table(data, cfg, ModelKind::kBox);
  ASSERT_EQ(t.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) EXPECT_GT(predict(t, i, j, cfg.smoothing()).xy, 0.5);
  }
}

}  // namespace
}  // namespace boxoverlap
