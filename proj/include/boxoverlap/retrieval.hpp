#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "boxoverlap/box.hpp"
#include "boxoverlap/embedding_table.hpp"

namespace boxoverlap {

enum class Relation { kZoomIn, kZoomOut, kCloneLike, kObliqueOrCropOut, kUnrelated };

std::string_view to_string(Relation r);

struct RelationThresholds {
  double low = 0.3;
  double high = 0.6;
  double unrelated = 0.05;
};

struct RelationLabel {
  Relation relation = Relation::kUnrelated;
  double nbo_qr = 0.0;
  double nbo_rq = 0.0;
};

// Relation of a retrieved image r to a query q from (NBO(q->r), NBO(r->q)).
//
// Both below `unrelated` -> unrelated; neither reaching `high` -> oblique or
// crop-out; both reaching `high` -> clone-like. Otherwise exactly one side is
// high: when the other side is below `low`, or the gap between them is at
// least high - low, the pair is a zoom (zoom-in when r->q is the high side);
// a small gap is clone-like.
RelationLabel classify_relation(double nbo_qr, double nbo_rq,
                                const RelationThresholds& t = {});

// Factor to resize the query so the co-visible surface spans equal pixel
// counts: sqrt((N_r / N_q) * nbo_rq / nbo_qr). Throws GeometryError when
// nbo_qr == 0.
double estimate_scale(double nbo_qr, double nbo_rq, double pixels_q, double pixels_r);

struct QueryResult {
  std::string id;
  double enclosure = 0.0;      // NBO(query -> retrieved)
  double concentration = 0.0;  // NBO(retrieved -> query)
  double score = 0.0;          // 0.5 * (enclosure + concentration)
};

struct ScoreRange {
  double lo = 0.0;
  double hi = 1.0;
};

// Immutable index over box embeddings.
//
// An STR-packed R-tree is keyed on the three dimensions with the largest
// spread of box centres. Nodes keep their bounding rectangle in all D
// dimensions (plus the smallest member extent per dimension), which gives
// upper bounds on enclosure and concentration for branch-and-bound pruning;
// candidates are scored exactly, so results equal an exhaustive scan.
class BoxIndex {
 public:
  BoxIndex() = default;
  BoxIndex(std::vector<std::string> ids, std::vector<BoxEmbedding> boxes,
           SmoothingConfig cfg);
  // Throws ConfigError for a vector table.
  static BoxIndex build(const EmbeddingTable& table, SmoothingConfig cfg);

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  const SmoothingConfig& smoothing() const { return cfg_; }
  const std::vector<std::size_t>& key_dims() const { return key_dims_; }
  const BoxEmbedding& box(std::string_view id) const;

  // k best entries by score descending, ties by ascending id.
  std::vector<QueryResult> query_topk(const BoxEmbedding& q, std::size_t k) const;
  std::vector<QueryResult> query_topk_exhaustive(const BoxEmbedding& q, std::size_t k) const;

  // All entries with enclosure and concentration inside the ranges, in id
  // order. Ranges are [lo, hi), closed at 1 so a partition of [0,1] covers
  // every entry once. Throws ConfigError for empty/inverted ranges.
  std::vector<QueryResult> query_quadrant(const BoxEmbedding& q, ScoreRange enclosure,
                                          ScoreRange concentration) const;

  QueryResult score(const BoxEmbedding& q, std::size_t entry) const;

 private:
  static constexpr std::size_t kKeyDims = 3;

  struct Node {
    std::uint32_t begin = 0;  // children (inner) or entries (leaf) range
    std::uint32_t end = 0;
    bool leaf = true;
  };

  struct Bound {
    double enclosure;
    double concentration;
  };

  void build_tree();
  Bound upper_bound(const BoxEmbedding& q, std::size_t node) const;
  void check_query(const BoxEmbedding& q) const;

  std::vector<std::string> ids_;
  std::vector<BoxEmbedding> boxes_;
  std::vector<std::size_t> by_id_;  // entry indices sorted by id
  SmoothingConfig cfg_;
  std::size_t dim_ = 0;
  std::vector<std::size_t> key_dims_;
  std::vector<std::uint32_t> entry_order_;  // leaf payloads
  std::vector<Node> nodes_;                 // root is nodes_.back()
  // Per node, 3*D values: lower_min, upper_max, extent_min.
  std::vector<double> node_bounds_;
};

}  // namespace boxoverlap
