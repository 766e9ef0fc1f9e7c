#include "commands.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "boxoverlap/error.hpp"
#include "boxoverlap/io.hpp"
#include "boxoverlap/retrieval.hpp"
#include "boxoverlap/synth.hpp"

namespace boxoverlap::cli {

namespace {

// Runs `write` against the file at `path`, or stdout when unset.
template <typename F>
void emit(const std::optional<fs::path>& path, F&& write) {
  if (!path) {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(*path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path->string() + "'");
  write(out);
  if (!out) throw DataError("write failed for '" + path->string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void apply_geometry(NsoConfig& cfg, const GeometryOptions& g) {
  if (g.radius) cfg.radius = *g.radius;
  if (g.n_sub) cfg.n_sub = *g.n_sub;
  if (g.seed) cfg.seed = *g.seed;
  if (g.unweighted) cfg.weighted = false;
  if (!(cfg.radius > 0.0)) throw ConfigError("radius must be > 0");
  if (cfg.n_sub == 0) throw ConfigError("n-sub must be >= 1");
}

// NSO settings recorded by the generator, so `nso --all` reproduces pairs.csv.
NsoConfig scene_nso_config(const SceneFile& scene) {
  NsoConfig cfg;
  if (!scene.provenance.is_object() || !scene.provenance.contains("nso")) return cfg;
  const auto& j = scene.provenance.at("nso");
  try {
    cfg.radius = j.value("radius", cfg.radius);
    cfg.n_sub = j.value("n_sub", cfg.n_sub);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.weighted = j.value("weighted", cfg.weighted);
  } catch (const nlohmann::json::exception&) {
    throw DataError("scene.json: malformed field 'provenance.nso'");
  }
  return cfg;
}

std::map<std::string, double> pixel_counts(const std::optional<fs::path>& data) {
  std::map<std::string, double> out;
  if (!data) return out;
  for (const auto& v : read_scene(*data).views) {
    out[v.id()] = static_cast<double>(v.intrinsics().pixel_count());
  }
  return out;
}

double pixels_of(const std::map<std::string, double>& counts, const std::string& id) {
  const auto it = counts.find(id);
  return it == counts.end() ? 1.0 : it->second;
}

BoxIndex load_index(const fs::path& checkpoint, double rho, EmbeddingTable* table_out) {
  Checkpoint ck = read_checkpoint(checkpoint);
  if (ck.table.kind() != ModelKind::kBox) {
    throw ConfigError("'" + checkpoint.string() + "' holds a vector table; a box table is required");
  }
  BoxIndex index = BoxIndex::build(ck.table, SmoothingConfig{rho});
  if (table_out) *table_out = std::move(ck.table);
  return index;
}

nlohmann::json scale_json(double nbo_qr, double nbo_rq, double pixels_q, double pixels_r) {
  if (!(nbo_qr > 0.0)) return nullptr;
  return estimate_scale(nbo_qr, nbo_rq, pixels_q, pixels_r);
}

}  // namespace

int cmd_synth(const SynthArgs& args) {
  DatasetSpec spec = args.config ? parse_dataset_spec(read_text(*args.config))
                                 : default_dataset_spec();
  if (!args.patterns.empty()) spec.patterns = args.patterns;
  if (args.surface) spec.surface = *args.surface;
  if (args.seed) spec.seed = *args.seed;
  if (args.width) spec.width = *args.width;
  if (args.height) spec.height = *args.height;
  if (args.self_pairs) spec.self_pairs = true;
  apply_geometry(spec.nso, args.geometry);

  const Dataset ds = generate_dataset(spec, {args.threads, args.oracle}, args.out);
  std::cerr << "synth: " << ds.views.size() << " views, " << ds.records.size() << " pairs -> "
            << args.out.string() << '\n';
  return kExitOk;
}

int cmd_nso(const NsoArgs& args) {
  if (args.format != "csv" && args.format != "jsonl") {
    throw ConfigError("unknown format '" + args.format + "' (expected csv|jsonl)");
  }
  const SceneFile scene = read_scene(args.data);
  NsoConfig cfg = scene_nso_config(scene);
  apply_geometry(cfg, args.geometry);

  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < scene.views.size(); ++i) by_id[scene.views[i].id()] = i;
  auto lookup = [&](const std::string& id) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw ConfigError("unknown image id '" + id + "'");
    return it->second;
  };

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (args.pairs) {
    for (const auto& [x, y] : read_pair_requests(*args.pairs)) pairs.emplace_back(lookup(x), lookup(y));
  } else {
    for (std::size_t i = 0; i < scene.views.size(); ++i) {
      if (args.self_pairs) pairs.emplace_back(i, i);
      for (std::size_t j = i + 1; j < scene.views.size(); ++j) pairs.emplace_back(i, j);
    }
  }

  // Prepare only the views that are referenced.
  std::vector<bool> used(scene.views.size(), false);
  for (const auto& [i, j] : pairs) used[i] = used[j] = true;
  std::vector<PreparedView> prepared(scene.views.size());
  for (std::size_t i = 0; i < scene.views.size(); ++i) {
    if (used[i]) prepared[i] = prepare_view(scene.views[i], cfg);
  }
  const auto records = compute_pairs(prepared, pairs, cfg, args.threads, args.oracle);

  emit(args.out, [&](std::ostream& out) {
    if (args.format == "csv") {
      write_pairs_csv(out, records);
      return;
    }
    for (const auto& r : records) {
      out << nlohmann::json{{"id_x", r.id_x}, {"id_y", r.id_y}, {"nso_xy", r.nso_xy},
                            {"nso_yx", r.nso_yx}}.dump()
          << '\n';
    }
  });
  if (args.oracle) std::cerr << "nso: brute-force oracle agrees on " << records.size() << " pairs\n";
  return kExitOk;
}

int cmd_train(const TrainArgs& args) {
  const ModelKind kind = parse_model_kind(args.model);
  const PairDataset data = PairDataset::from_records(read_pairs_csv(args.pairs));
  std::optional<Checkpoint> resume;
  if (args.resume) resume = read_checkpoint(*args.resume);
  const std::uint64_t first_step = resume ? resume->optimizer.step + 1 : 1;

  const TrainResult result = train(data, args.config, kind, resume ? &*resume : nullptr);
  write_checkpoint(args.out, result.checkpoint);
  if (args.loss_trace) write_loss_trace(*args.loss_trace, result.loss_trace, first_step);
  if (args.export_json) {
    emit(args.export_json, [&](std::ostream& out) {
      out << table_to_json(result.checkpoint.table).dump(2) << '\n';
    });
  }
  std::cerr << "train: " << data.pairs.size() << " pairs, " << result.loss_trace.size()
            << " steps, final batch loss " << result.loss_trace.back() << '\n';
  return kExitOk;
}

int cmd_eval(const EvalArgs& args) {
  const Checkpoint ck = read_checkpoint(args.checkpoint);
  const auto pairs = read_pairs_csv(args.pairs);
  const Metrics m = evaluate(ck.table, pairs, SmoothingConfig{args.rho});
  emit(args.out, [&](std::ostream& out) { out << metrics_to_json(m).dump() << '\n'; });
  return kExitOk;
}

int cmd_query(const QueryArgs& args) {
  EmbeddingTable table;
  const BoxIndex index = load_index(args.checkpoint, args.rho, &table);
  const auto pixels = pixel_counts(args.data);
  const bool quadrant = !args.enclosure_range.empty() || !args.concentration_range.empty();
  auto range = [](const std::vector<double>& v) {
    if (v.empty()) return ScoreRange{};
    if (v.size() != 2) throw ConfigError("score ranges take two values: lo hi");
    return ScoreRange{v[0], v[1]};
  };

  std::vector<std::string> queries = args.queries;
  if (queries.empty()) queries = table.ids();

  emit(args.out, [&](std::ostream& out) {
    for (const auto& qid : queries) {
      const BoxEmbedding& q = index.box(qid);
      std::vector<QueryResult> hits;
      if (quadrant) {
        hits = index.query_quadrant(q, range(args.enclosure_range), range(args.concentration_range));
      } else {
        hits = index.query_topk(q, args.k + (args.exclude_self ? 1 : 0));
      }
      std::size_t written = 0;
      for (const auto& h : hits) {
        if (args.exclude_self && h.id == qid) continue;
        if (!quadrant && written == args.k) break;
        const RelationLabel label = classify_relation(h.enclosure, h.concentration);
        nlohmann::json j = {{"query_id", qid},
                            {"retrieved_id", h.id},
                            {"enclosure", h.enclosure},
                            {"concentration", h.concentration},
                            {"score", h.score},
                            {"relation", std::string(to_string(label.relation))},
                            {"scale", scale_json(h.enclosure, h.concentration,
                                                 pixels_of(pixels, qid), pixels_of(pixels, h.id))}};
        out << j.dump() << '\n';
        ++written;
      }
    }
  });
  return kExitOk;
}

int cmd_scale(const ScaleArgs& args) {
  if (args.format != "csv" && args.format != "jsonl") {
    throw ConfigError("unknown format '" + args.format + "' (expected csv|jsonl)");
  }
  const BoxIndex index = load_index(args.checkpoint, args.rho, nullptr);
  const auto pixels = pixel_counts(args.data);
  const auto requests = read_pair_requests(args.pairs);
  emit(args.out, [&](std::ostream& out) {
    if (args.format == "csv") out << "id_q,id_r,enclosure,concentration,scale\n";
    for (const auto& [qid, rid] : requests) {
      const BoxEmbedding& q = index.box(qid);
      const BoxEmbedding& r = index.box(rid);
      const double nbo_qr = nbo(q, r, index.smoothing());
      const double nbo_rq = nbo(r, q, index.smoothing());
      const nlohmann::json s = scale_json(nbo_qr, nbo_rq, pixels_of(pixels, qid), pixels_of(pixels, rid));
      if (args.format == "csv") {
        out << qid << ',' << rid << ',' << nlohmann::json(nbo_qr).dump() << ','
            << nlohmann::json(nbo_rq).dump() << ',' << (s.is_null() ? "" : s.dump()) << '\n';
      } else {
        out << nlohmann::json{{"query_id", qid}, {"retrieved_id", rid}, {"enclosure", nbo_qr},
                              {"concentration", nbo_rq}, {"scale", s}}.dump()
            << '\n';
      }
    }
  });
  return kExitOk;
}

}  // namespace boxoverlap::cli
