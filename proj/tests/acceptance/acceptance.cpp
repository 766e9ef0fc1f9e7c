// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Optional arguments select criteria by number, e.g. `acceptance 3 9`.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "boxoverlap/box.hpp"
#include "boxoverlap/overlap.hpp"
#include "boxoverlap/retrieval.hpp"
#include "boxoverlap/synth.hpp"
#include "boxoverlap/trainer.hpp"

namespace {

using namespace boxoverlap;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Default dataset and the two models trained on it, shared by 5 and 7.
struct Trained {
  Dataset dataset;
  TrainConfig cfg;
  EmbeddingTable box;
  EmbeddingTable vector;
  double dataset_seconds = 0.0;
  double train_seconds = 0.0;
};

const Trained& trained_default() {
  static const Trained t = [] {
    Trained r;
    auto t0 = Clock::now();
    r.dataset = generate_dataset(default_dataset_spec(), {1, false}, std::nullopt);
    r.dataset_seconds = seconds_since(t0);
    const auto data = PairDataset::from_records(r.dataset.records);
    r.cfg.seed = 7;
    t0 = Clock::now();
    r.box = train(data, r.cfg, ModelKind::kBox).checkpoint.table;
    r.vector = train(data, r.cfg, ModelKind::kVector).checkpoint.table;
    r.train_seconds = seconds_since(t0);
    return r;
  }();
  return t;
}

// 1. Hard nbo against a Monte-Carlo containment fraction.
Outcome box_algebra_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> pos(-2.0, 2.0), len(0.2, 3.0), u01(0.0, 1.0);
  constexpr int kPairs = 200;
  constexpr int kSamples = 1000000;
  const SmoothingConfig hard{0.0};
  double worst_z = 0.0;
  int failures = 0;
  for (int i = 0; i < kPairs; ++i) {
    const std::size_t dim = 1 + static_cast<std::size_t>(i % 4);
    BoxEmbedding x, y;
    for (std::size_t d = 0; d < dim; ++d) {
      const double lx = pos(rng), ly = pos(rng);
      x.lower.push_back(lx);
      x.upper.push_back(lx + len(rng));
      y.lower.push_back(ly);
      y.upper.push_back(ly + len(rng));
    }
    const double p = nbo(x, y, hard);
    std::int64_t inside = 0;
    for (int s = 0; s < kSamples; ++s) {
      bool in = true;
      for (std::size_t d = 0; d < dim; ++d) {
        const double v = x.lower[d] + u01(rng) * (x.upper[d] - x.lower[d]);
        in = in && v >= y.lower[d] && v <= y.upper[d];
      }
      inside += in;
    }
    const double frac = static_cast<double>(inside) / kSamples;
    const double sd = std::sqrt(p * (1.0 - p) / kSamples);
    const double diff = std::abs(frac - p);
    if (sd == 0.0) {
      if (diff != 0.0) ++failures;
      continue;
    }
    worst_z = std::max(worst_z, diff / sd);
    if (diff > 3.0 * sd) ++failures;
  }
  const double secs = seconds_since(t0);
  return {failures == 0 && secs < 60.0,
          std::to_string(kPairs - failures) + "/" + std::to_string(kPairs) +
              " within 3 sd (max " + fmt("%.2f", worst_z) + " sd), " + fmt("%.1f", secs) + " s"};
}

// 2. Smoothed max(0, v) approaches the hinge as rho shrinks.
Outcome smoothing_limit() {
  std::vector<double> errs;
  for (double rho : {1.0, 0.1, 0.01, 0.001}) {
    double worst = 0.0;
    for (int i = -1000; i <= 1000; ++i) {
      const double v = i * 0.01;
      worst = std::max(worst, std::abs(sigma(v, SmoothingConfig{rho}) - std::max(0.0, v)));
    }
    errs.push_back(worst);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < errs.size(); ++i) monotone = monotone && errs[i] < errs[i - 1];
  std::string d = "max err";
  for (double e : errs) d += " " + fmt("%.3g", e);
  return {monotone && errs.back() < 7e-3, d};
}

// 3. Analytic loss_box gradient against central differences.
Outcome gradient_check() {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const SmoothingConfig cfg{5.0};
  constexpr std::size_t kDim = 8;
  constexpr double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    // Half at unit scale, half at the trainer's box scale with centres spread
    // like a trained table. Far-apart boxes have gradients near 1e-10, below
    // what h = 1e-5 differences resolve, so they are not sampled.
    const double scale = trial % 2 == 0 ? 1.0 : TrainConfig{}.box_scale;
    const double center_sd = trial % 2 == 0 ? 0.5 : 0.2 * scale;
    EmbeddingTable t(ModelKind::kBox, kDim);
    for (const char* id : {"x", "y"}) {
      std::vector<double> p(2 * kDim);
      for (std::size_t d = 0; d < kDim; ++d) {
        p[d] = center_sd * unit(rng);
        p[kDim + d] = scale * (1.0 + 0.3 * unit(rng));
      }
      t.add(id, p);
    }
    const OverlapRecord pair{"x", "y", u01(rng), u01(rng)};
    std::vector<double> grad(t.flat().size(), 0.0);
    loss_with_gradient(t, pair, cfg, 1.0, grad);
    double diff2 = 0.0, an2 = 0.0, fd2 = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double keep = t.flat()[i];
      t.flat()[i] = keep + h;
      const double lp = loss_box(t, pair, cfg);
      t.flat()[i] = keep - h;
      const double lm = loss_box(t, pair, cfg);
      t.flat()[i] = keep;
      const double fd = (lp - lm) / (2.0 * h);
      diff2 += (fd - grad[i]) * (fd - grad[i]);
      an2 += grad[i] * grad[i];
      fd2 += fd * fd;
    }
    const double denom = std::max({std::sqrt(an2), std::sqrt(fd2), 1e-12});
    worst = std::max(worst, std::sqrt(diff2) / denom);
  }
  return {worst < 1e-4, "max relative error " + fmt("%.2e", worst) + " over 100 configs"};
}

// 4. k-d tree overlap_count equals the brute-force scan on the default dataset.
Outcome nso_oracle() {
  const auto t0 = Clock::now();
  const DatasetSpec spec = default_dataset_spec();
  const Surface surface = make_surface(spec.surface, spec.seed);
  const CameraScript script = build_script(spec, surface);
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> pick(0, script.cameras.size() - 1);
  int equal = 0;
  for (int i = 0; i < 50; ++i) {
    std::size_t a = pick(rng), b = pick(rng);
    while (b == a) b = pick(rng);
    const PreparedView x = prepare_view(render_depth(surface, script.cameras[a]), spec.nso);
    const PreparedView y = prepare_view(render_depth(surface, script.cameras[b]), spec.nso);
    const bool same = directed_nso(x, y, spec.nso) == directed_nso_brute_force(x, y, spec.nso) &&
                      directed_nso(y, x, spec.nso) == directed_nso_brute_force(y, x, spec.nso);
    equal += same;
  }
  const double secs = seconds_since(t0);
  return {equal == 50 && secs < 300.0,
          std::to_string(equal) + "/50 pairs identical, " + fmt("%.1f", secs) + " s"};
}

Metrics metrics_on(const EmbeddingTable& table, const std::vector<OverlapRecord>& pairs,
                   const SmoothingConfig& cfg) {
  return evaluate(table, pairs, cfg);
}

// 5. Box beats vector embeddings, most clearly on asymmetric pairs.
Outcome synthetic_table() {
  const Trained& t = trained_default();
  const auto& recs = t.dataset.records;
  std::vector<OverlapRecord> asym;
  for (const auto& r : recs) {
    if (std::abs(r.nso_xy - r.nso_yx) >= 0.3) asym.push_back(r);
  }
  const SmoothingConfig s = t.cfg.smoothing();
  const Metrics box = metrics_on(t.box, recs, s);
  const Metrics vec = metrics_on(t.vector, recs, s);
  const double box_asym = asym.empty() ? 0.0 : metrics_on(t.box, asym, s).acc_at_0_1;
  const double vec_asym = asym.empty() ? 0.0 : metrics_on(t.vector, asym, s).acc_at_0_1;
  const double secs = t.dataset_seconds + t.train_seconds;
  const bool ok = box.acc_at_0_1 >= 0.95 && box.l1_norm <= 0.05 && !asym.empty() &&
                  box_asym - vec_asym >= 0.10 && secs < 600.0;
  return {ok, "box acc " + fmt("%.3f", box.acc_at_0_1) + " L1 " + fmt("%.3f", box.l1_norm) +
                  "; vector acc " + fmt("%.3f", vec.acc_at_0_1) + "; asymmetric subset (" +
                  std::to_string(asym.size()) + " pairs) box " + fmt("%.3f", box_asym) +
                  " vs vector " + fmt("%.3f", vec_asym) + ", " + fmt("%.1f", secs) + " s"};
}

// 6. One asymmetric pair: boxes fit it, a symmetric predictor cannot.
Outcome asymmetric_floor() {
  const auto data = PairDataset::from_records({{"x", "y", 1.0, 0.25}});
  TrainConfig cfg;
  cfg.seed = 7;
  cfg.steps = 5000;
  auto l1 = [](const Prediction& p) { return std::abs(p.xy - 1.0) + std::abs(p.yx - 0.25); };
  double floor = 1e9;
  for (int i = 0; i <= 1000; ++i) floor = std::min(floor, l1({i / 1000.0, i / 1000.0}));
  const double box = l1(predict(train(data, cfg, ModelKind::kBox).checkpoint.table, 0, 1, cfg.smoothing()));
  const double vec =
      l1(predict(train(data, cfg, ModelKind::kVector).checkpoint.table, 0, 1, cfg.smoothing()));
  const bool ok = box < 0.02 && floor >= 0.75 - 1e-12 && vec >= floor - 1e-12 && vec - 0.75 <= 0.05;
  return {ok, "box L1 " + fmt("%.2e", box) + ", symmetric floor " + fmt("%.3f", floor) +
                  ", vector L1 " + fmt("%.4f", vec)};
}

// 7. Relative scale of zoom pairs from the trained boxes.
Outcome scale_estimation() {
  const Trained& t = trained_default();
  int good = 0, total = 0;
  std::string list;
  for (const auto& a : t.dataset.annotations) {
    if (a.pattern != "zoom") continue;
    const std::size_t ix = t.box.index_of(a.id_x), iy = t.box.index_of(a.id_y);
    const Prediction p = predict(t.box, ix, iy, t.cfg.smoothing());
    // Query = wide view x, retrieved = narrow view y; equal resolutions.
    const double n = 1.0;
    const double s = p.xy > 0.0 ? estimate_scale(p.xy, p.yx, n, n) : INFINITY;
    const bool within = std::abs(s - a.parameter) <= 0.15 * a.parameter;
    good += within;
    ++total;
    list += " " + fmt("%.3g", a.parameter) + "->" + fmt("%.3g", s) + (within ? "" : "(x)");
  }
  return {total == 8 && good >= 7, std::to_string(good) + "/" + std::to_string(total) +
                                       " within 15%:" + list};
}

// 8. Relation labels of the exemplar values and of synthetic pairs.
Outcome relation_classification() {
  const bool exemplars = classify_relation(0.152, 0.831).relation == Relation::kZoomIn &&
                         classify_relation(0.808, 0.887).relation == Relation::kCloneLike &&
                         classify_relation(0.853, 0.053).relation == Relation::kZoomOut;
  const std::vector<std::string> patterns{"zoom:1.5", "zoom:2",    "zoom:3",     "zoom:4",
                                          "clone:0",  "clone:0.2", "clone:0.4",  "oblique:50",
                                          "oblique:60", "oblique:70"};
  int right = 0, total = 0;
  std::string misses;
  for (const auto& text : patterns) {
    const Pattern pattern = parse_pattern(text);
    int miss = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const SyntheticPair p = make_pair(pattern, make_surface("heightfield", seed), seed);
      const OverlapRecord r = compute_nso(p.x, p.y, NsoConfig{});
      const bool ok = classify_relation(r.nso_xy, r.nso_yx).relation == p.annotation.relation;
      right += ok;
      miss += !ok;
      ++total;
    }
    if (miss) misses += " " + text + ":" + std::to_string(miss);
  }
  const double frac = static_cast<double>(right) / total;
  return {exemplars && frac >= 0.95,
          std::string("exemplars ") + (exemplars ? "ok" : "WRONG") + ", " + std::to_string(right) +
              "/" + std::to_string(total) + " synthetic pairs labelled correctly" +
              (misses.empty() ? "" : " (misses" + misses + ")")};
}

// 9. R-tree top-k equals the exhaustive scan and is faster.
Outcome index_exactness() {
  constexpr std::size_t kDim = 32;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> c(-50.0, 50.0), w(0.5, 10.0);
  auto random_box = [&] {
    BoxEmbedding b;
    for (std::size_t d = 0; d < kDim; ++d) {
      const double lo = c(rng);
      b.lower.push_back(lo);
      b.upper.push_back(lo + w(rng));
    }
    return b;
  };
  std::vector<std::string> ids;
  std::vector<BoxEmbedding> boxes;
  for (int i = 0; i < 5000; ++i) {
    ids.push_back("img" + std::to_string(i));
    boxes.push_back(random_box());
  }
  const BoxIndex index(ids, boxes, SmoothingConfig{0.0});
  std::vector<BoxEmbedding> queries;
  for (int i = 0; i < 100; ++i) queries.push_back(random_box());

  constexpr std::size_t k = 10;
  int identical = 0;
  for (const auto& q : queries) {
    const auto a = index.query_topk(q, k);
    const auto b = index.query_topk_exhaustive(q, k);
    bool same = a.size() == b.size();
    for (std::size_t i = 0; same && i < a.size(); ++i) same = a[i].id == b[i].id && a[i].score == b[i].score;
    identical += same;
  }
  // Best of three timed passes per path.
  double t_index = INFINITY, t_scan = INFINITY;
  std::size_t sink = 0;
  for (int rep = 0; rep < 3; ++rep) {
    auto t0 = Clock::now();
    for (const auto& q : queries) sink += index.query_topk(q, k).size();
    t_index = std::min(t_index, seconds_since(t0));
    t0 = Clock::now();
    for (const auto& q : queries) sink += index.query_topk_exhaustive(q, k).size();
    t_scan = std::min(t_scan, seconds_since(t0));
  }
  const double speedup = t_scan / t_index;
  return {identical == 100 && speedup >= 2.0 && sink > 0,
          std::to_string(identical) + "/100 queries identical, index " + fmt("%.4f", t_index) +
              " s vs scan " + fmt("%.4f", t_scan) + " s (" + fmt("%.1f", speedup) + "x)"};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(BOXOVERLAP_CLI_PATH) + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 10. synth -> nso -> train -> eval twice gives identical metrics bytes.
Outcome end_to_end_determinism() {
  const auto t0 = Clock::now();
  const fs::path root = fs::temp_directory_path() / "boxoverlap_acceptance_e2e";
  fs::remove_all(root);
  std::vector<std::string> metrics;
  for (const char* run : {"run1", "run2"}) {
    const fs::path d = root / run;
    fs::create_directories(d);
    const std::string data = (d / "data").string();
    const int rc = run_cli("--threads 1 synth --seed 7 --out " + data) |
                   run_cli("--threads 1 nso --data " + data + " --all --out " + (d / "pairs.csv").string()) |
                   run_cli("--threads 1 train --seed 7 --pairs " + (d / "pairs.csv").string() + " --out " +
                           (d / "model.bin").string()) |
                   run_cli("--threads 1 eval --checkpoint " + (d / "model.bin").string() + " --pairs " +
                           (d / "pairs.csv").string() + " --out " + (d / "metrics.json").string());
    if (rc != 0) return {false, std::string(run) + ": a pipeline stage failed"};
    metrics.push_back(slurp(d / "metrics.json"));
  }
  const bool same = !metrics[0].empty() && metrics[0] == metrics[1];
  std::string shown = metrics[0];
  while (!shown.empty() && shown.back() == '\n') shown.pop_back();
  fs::remove_all(root);
  return {same, std::string(same ? "identical" : "DIFFERENT") + " metrics " + shown + ", " +
                    fmt("%.1f", seconds_since(t0)) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"box algebra vs Monte-Carlo", box_algebra_oracle},
      {"smoothing limit", smoothing_limit},
      {"loss gradient vs finite differences", gradient_check},
      {"NSO k-d tree vs brute force", nso_oracle},
      {"box vs vector embeddings", synthetic_table},
      {"asymmetric pair floor", asymmetric_floor},
      {"zoom scale estimation", scale_estimation},
      {"relation classification", relation_classification},
      {"R-tree vs exhaustive scan", index_exactness},
      {"end-to-end determinism", end_to_end_determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(n)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << n << ". " << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
