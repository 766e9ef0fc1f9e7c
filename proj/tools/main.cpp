// boxoverlap: dataset synthesis, surface overlap, box embedding training,
// evaluation and retrieval from one subcommand-style binary.

#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "boxoverlap/error.hpp"
#include "commands.hpp"

namespace {

using namespace boxoverlap;
using namespace boxoverlap::cli;

// --seed, else BOXOVERLAP_SEED, else the built-in default.
std::optional<std::uint64_t> seed_or_env(const std::optional<std::uint64_t>& flag) {
  if (flag) return flag;
  const char* env = std::getenv("BOXOVERLAP_SEED");
  if (env == nullptr || *env == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(env, &used);
    if (used == std::string(env).size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(std::string("BOXOVERLAP_SEED is not an unsigned integer: '") + env + "'");
}

void add_geometry(CLI::App* cmd, GeometryOptions& g) {
  cmd->add_option("--radius", g.radius, "match radius in world units (default 0.1)");
  cmd->add_option("--n-sub", g.n_sub, "source subsample size (default 5000)");
  cmd->add_flag("--unweighted", g.unweighted, "disable cosine-normal weighting");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Box embeddings of images for asymmetric surface overlap"};
  app.require_subcommand(1);
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--threads", threads, "worker threads (1 = bit-deterministic)")
      ->check(CLI::PositiveNumber);

  SynthArgs synth;
  std::optional<std::uint64_t> synth_seed;
  std::optional<std::uint64_t> synth_nso_seed;
  auto* c_synth = app.add_subcommand("synth", "render a synthetic scene and its pair overlaps");
  c_synth->add_option("--out", synth.out, "output dataset directory")->required();
  c_synth->add_option("--pattern", synth.patterns,
                      "camera pattern: grid:N, zoom:F, clone:J, oblique:DEG, disjoint (repeatable)");
  c_synth->add_option("--config", synth.config, "generator config (JSON)")->check(CLI::ExistingFile);
  c_synth->add_option("--surface", synth.surface, "plane | heightfield | sphere");
  c_synth->add_option("--seed", synth_seed, "scene seed (default 7)");
  c_synth->add_option("--width", synth.width, "image width in pixels");
  c_synth->add_option("--height", synth.height, "image height in pixels");
  c_synth->add_option("--nso-seed", synth_nso_seed, "subsample seed (default 0)");
  add_geometry(c_synth, synth.geometry);
  c_synth->add_flag("--oracle", synth.oracle, "check every pair against the brute-force scan");
  c_synth->add_flag("--self-pairs", synth.self_pairs, "include (x, x) pairs");

  NsoArgs nso;
  auto* c_nso = app.add_subcommand("nso", "directed surface overlap of image pairs");
  c_nso->add_option("--data", nso.data, "dataset directory")->required();
  auto* pairs_opt = c_nso->add_option("--pairs", nso.pairs, "CSV of requested id pairs");
  auto* all_flag = c_nso->add_flag("--all", "all unordered pairs (default)");
  pairs_opt->excludes(all_flag);
  c_nso->add_option("--out", nso.out, "output file (default stdout)");
  c_nso->add_option("--format", nso.format, "csv | jsonl")->capture_default_str();
  c_nso->add_option("--seed", nso.geometry.seed, "subsample seed (default: from scene.json)");
  add_geometry(c_nso, nso.geometry);
  c_nso->add_flag("--oracle", nso.oracle, "assert equality with the brute-force scan");
  c_nso->add_flag("--self-pairs", nso.self_pairs, "with --all, include (x, x) pairs");

  TrainArgs tr;
  std::optional<std::uint64_t> train_seed;
  auto* c_train = app.add_subcommand("train", "fit box or vector embeddings to pair overlaps");
  c_train->add_option("--pairs", tr.pairs, "training pairs CSV")->required()->check(CLI::ExistingFile);
  c_train->add_option("--out", tr.out, "checkpoint path")->required();
  c_train->add_option("--model", tr.model, "box | vector")->capture_default_str();
  c_train->add_option("--dim", tr.config.dim, "embedding dimension")->capture_default_str();
  c_train->add_option("--rho", tr.config.rho, "smoothing temperature")->capture_default_str();
  c_train->add_option("--lr", tr.config.learning_rate, "base learning rate")->capture_default_str();
  c_train->add_option("--box-scale", tr.config.box_scale, "box coordinate scale")->capture_default_str();
  c_train->add_option("--final-lr-fraction", tr.config.final_lr_fraction,
                      "learning rate at the end of the cosine schedule")
      ->capture_default_str();
  c_train->add_option("--schedule-steps", tr.config.schedule_steps,
                      "schedule length (0 = this run's steps)");
  c_train->add_option("--steps", tr.config.steps, "optimizer steps")->capture_default_str();
  c_train->add_option("--batch", tr.config.batch_size, "pairs per step")->capture_default_str();
  c_train->add_option("--seed", train_seed, "initialization and sampling seed (default 0)");
  c_train->add_option("--resume", tr.resume, "continue from a checkpoint")->check(CLI::ExistingFile);
  c_train->add_option("--loss-trace", tr.loss_trace, "write step,loss CSV");
  c_train->add_option("--export-json", tr.export_json, "write the table as JSON");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "L1 norm, RMSE and accuracy of predicted overlaps");
  c_eval->add_option("--checkpoint", ev.checkpoint)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--pairs", ev.pairs, "ground-truth pairs CSV")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--rho", ev.rho)->capture_default_str();
  c_eval->add_option("--out", ev.out, "metrics JSON path (default stdout)");

  QueryArgs qa;
  auto* c_query = app.add_subcommand("query", "retrieve images by box overlap");
  c_query->add_option("--checkpoint", qa.checkpoint)->required()->check(CLI::ExistingFile);
  c_query->add_option("--query", qa.queries, "query image id (repeatable; default all)");
  c_query->add_option("-k,--k", qa.k, "results per query")->capture_default_str();
  c_query->add_option("--rho", qa.rho)->capture_default_str();
  c_query->add_flag("--exclude-self", qa.exclude_self, "drop the query from its own results");
  c_query->add_option("--data", qa.data, "dataset directory (image sizes for the scale)");
  c_query->add_option("--enclosure-range", qa.enclosure_range, "lo hi")->expected(2);
  c_query->add_option("--concentration-range", qa.concentration_range, "lo hi")->expected(2);
  c_query->add_option("--out", qa.out, "JSON lines path (default stdout)");

  ScaleArgs sc;
  auto* c_scale = app.add_subcommand("scale", "relative scale of image pairs");
  c_scale->add_option("--checkpoint", sc.checkpoint)->required()->check(CLI::ExistingFile);
  c_scale->add_option("--pairs", sc.pairs, "CSV of (query, retrieved) ids")->required()->check(CLI::ExistingFile);
  c_scale->add_option("--rho", sc.rho)->capture_default_str();
  c_scale->add_option("--data", sc.data, "dataset directory (image sizes)");
  c_scale->add_option("--format", sc.format, "jsonl | csv")->capture_default_str();
  c_scale->add_option("--out", sc.out, "output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (c_synth->parsed()) {
      synth.threads = threads;
      synth.seed = seed_or_env(synth_seed);
      synth.geometry.seed = synth_nso_seed;
      return cmd_synth(synth);
    }
    if (c_nso->parsed()) {
      nso.threads = threads;
      return cmd_nso(nso);
    }
    if (c_train->parsed()) {
      if (auto s = seed_or_env(train_seed)) tr.config.seed = *s;
      return cmd_train(tr);
    }
    if (c_eval->parsed()) return cmd_eval(ev);
    if (c_query->parsed()) return cmd_query(qa);
    if (c_scale->parsed()) return cmd_scale(sc);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitConfig;
}
