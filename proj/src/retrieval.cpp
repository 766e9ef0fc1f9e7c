#include "boxoverlap/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>

#include "boxoverlap/error.hpp"

namespace boxoverlap {

namespace {

constexpr std::size_t kFanout = 16;
// Relative slack on node bounds; covers rounding in the bound arithmetic.
constexpr double kBoundSlack = 1e-12;

bool in_range(double v, const ScoreRange& r) {
  return v >= r.lo && (v < r.hi || (r.hi >= 1.0 && v <= r.hi));
}

void check_range(const ScoreRange& r, const char* name) {
  if (!(r.lo >= 0.0 && r.hi <= 1.0 && r.lo < r.hi)) {
    throw ConfigError(std::string(name) + " range must satisfy 0 <= lo < hi <= 1");
  }
}

}  // namespace

std::string_view to_string(Relation r) {
  switch (r) {
    case Relation::kZoomIn:
      return "zoom-in";
    case Relation::kZoomOut:
      return "zoom-out";
    case Relation::kCloneLike:
      return "clone-like";
    case Relation::kObliqueOrCropOut:
      return "oblique-or-crop-out";
    case Relation::kUnrelated:
      return "unrelated";
  }
  return "unrelated";
}

RelationLabel classify_relation(double nbo_qr, double nbo_rq, const RelationThresholds& t) {
  RelationLabel label{Relation::kUnrelated, nbo_qr, nbo_rq};
  const double hi = std::max(nbo_qr, nbo_rq);
  const double lo = std::min(nbo_qr, nbo_rq);
  if (hi < t.unrelated) {
    label.relation = Relation::kUnrelated;
  } else if (hi < t.high) {
    label.relation = Relation::kObliqueOrCropOut;
  } else if (lo >= t.high) {
    label.relation = Relation::kCloneLike;
  } else if (lo < t.low || hi - lo >= t.high - t.low) {
    label.relation = nbo_rq >= nbo_qr ? Relation::kZoomIn : Relation::kZoomOut;
  } else {
    label.relation = Relation::kCloneLike;
  }
  return label;
}

double estimate_scale(double nbo_qr, double nbo_rq, double pixels_q, double pixels_r) {
  if (!(nbo_qr > 0.0)) throw GeometryError("no estimated overlap");
  if (!(pixels_q > 0.0) || !(pixels_r > 0.0)) throw ConfigError("pixel counts must be positive");
  return std::sqrt((pixels_r / pixels_q) * (nbo_rq / nbo_qr));
}

BoxIndex::BoxIndex(std::vector<std::string> ids, std::vector<BoxEmbedding> boxes,
                   SmoothingConfig cfg)
    : ids_(std::move(ids)), boxes_(std::move(boxes)), cfg_(cfg) {
  cfg_.validate();
  if (ids_.size() != boxes_.size()) throw ConfigError("index: ids/boxes size mismatch");
  if (!boxes_.empty()) dim_ = boxes_.front().dim();
  for (const auto& b : boxes_) {
    if (b.dim() != dim_ || b.upper.size() != dim_) throw ConfigError("index: mixed box dimensions");
    if (cfg_.is_hard() && volume(b, cfg_) <= 0.0) throw GeometryError("degenerate box");
  }
  by_id_.resize(ids_.size());
  std::iota(by_id_.begin(), by_id_.end(), std::size_t{0});
  std::sort(by_id_.begin(), by_id_.end(),
            [&](std::size_t a, std::size_t b) { return ids_[a] < ids_[b]; });
  for (std::size_t i = 1; i < by_id_.size(); ++i) {
    if (ids_[by_id_[i]] == ids_[by_id_[i - 1]]) {
      throw ConfigError("index: duplicate id '" + ids_[by_id_[i]] + "'");
    }
  }
  build_tree();
}

BoxIndex BoxIndex::build(const EmbeddingTable& table, SmoothingConfig cfg) {
  if (table.kind() != ModelKind::kBox) {
    throw ConfigError("cannot index a vector embedding table");
  }
  std::vector<BoxEmbedding> boxes;
  boxes.reserve(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) boxes.push_back(table.box(i));
  return BoxIndex(table.ids(), std::move(boxes), cfg);
}

const BoxEmbedding& BoxIndex::box(std::string_view id) const {
  const auto it = std::lower_bound(by_id_.begin(), by_id_.end(), id,
                                   [&](std::size_t e, std::string_view v) { return ids_[e] < v; });
  if (it == by_id_.end() || ids_[*it] != id) {
    throw ConfigError("unknown image id '" + std::string(id) + "'");
  }
  return boxes_[*it];
}

void BoxIndex::build_tree() {
  nodes_.clear();
  node_bounds_.clear();
  entry_order_.clear();
  key_dims_.clear();
  const std::size_t n = boxes_.size();
  if (n == 0) return;

  auto center = [&](std::size_t e, std::size_t d) {
    return 0.5 * (boxes_[e].lower[d] + boxes_[e].upper[d]);
  };

  // Key dimensions: largest variance of box centres, lowest index on ties.
  std::vector<double> var(dim_, 0.0);
  for (std::size_t d = 0; d < dim_; ++d) {
    double mean = 0.0;
    for (std::size_t e = 0; e < n; ++e) mean += center(e, d);
    mean /= static_cast<double>(n);
    for (std::size_t e = 0; e < n; ++e) var[d] += (center(e, d) - mean) * (center(e, d) - mean);
  }
  std::vector<std::size_t> dims(dim_);
  std::iota(dims.begin(), dims.end(), std::size_t{0});
  std::stable_sort(dims.begin(), dims.end(),
                   [&](std::size_t a, std::size_t b) { return var[a] > var[b]; });
  dims.resize(std::min(kKeyDims, dim_));
  key_dims_ = dims;
  const std::size_t k = key_dims_.size();

  // Sort-Tile-Recursive packing of the entries into leaves. Ties fall back to
  // id order so the layout does not depend on insertion order.
  std::vector<std::uint32_t> order(by_id_.begin(), by_id_.end());
  const std::size_t leaves = (n + kFanout - 1) / kFanout;
  const auto slabs = static_cast<std::size_t>(
      std::ceil(std::pow(static_cast<double>(leaves), 1.0 / static_cast<double>(k))));
  auto sort_range = [&](std::size_t begin, std::size_t end, std::size_t d) {
    std::stable_sort(order.begin() + begin, order.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       return center(a, key_dims_[d]) < center(b, key_dims_[d]);
                     });
  };
  std::function<void(std::size_t, std::size_t, std::size_t)> tile =
      [&](std::size_t begin, std::size_t end, std::size_t level) {
        sort_range(begin, end, level);
        if (level + 1 >= k) return;
        const std::size_t count = end - begin;
        const std::size_t per_slab =
            std::max<std::size_t>(kFanout, (count + slabs - 1) / slabs);
        for (std::size_t s = begin; s < end; s += per_slab) {
          tile(s, std::min(end, s + per_slab), level + 1);
        }
      };
  tile(0, n, 0);
  entry_order_ = std::move(order);

  const double inf = std::numeric_limits<double>::infinity();
  auto make_node = [&](std::uint32_t begin, std::uint32_t end, bool leaf) {
    nodes_.push_back({begin, end, leaf});
    const std::size_t base = node_bounds_.size();
    node_bounds_.resize(base + 3 * dim_);
    double* lower_min = node_bounds_.data() + base;
    double* upper_max = lower_min + dim_;
    double* extent_min = upper_max + dim_;
    std::fill(lower_min, lower_min + dim_, inf);
    std::fill(upper_max, upper_max + dim_, -inf);
    std::fill(extent_min, extent_min + dim_, inf);
    for (std::uint32_t i = begin; i < end; ++i) {
      if (leaf) {
        const BoxEmbedding& b = boxes_[entry_order_[i]];
        for (std::size_t d = 0; d < dim_; ++d) {
          lower_min[d] = std::min(lower_min[d], b.lower[d]);
          upper_max[d] = std::max(upper_max[d], b.upper[d]);
          extent_min[d] = std::min(extent_min[d], b.upper[d] - b.lower[d]);
        }
      } else {
        const double* c = node_bounds_.data() + 3 * dim_ * i;
        for (std::size_t d = 0; d < dim_; ++d) {
          lower_min[d] = std::min(lower_min[d], c[d]);
          upper_max[d] = std::max(upper_max[d], c[dim_ + d]);
          extent_min[d] = std::min(extent_min[d], c[2 * dim_ + d]);
        }
      }
    }
  };

  std::size_t level_begin = 0;
  for (std::size_t i = 0; i < n; i += kFanout) {
    make_node(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(std::min(n, i + kFanout)),
              true);
  }
  std::size_t level_end = nodes_.size();
  while (level_end - level_begin > 1) {
    for (std::size_t i = level_begin; i < level_end; i += kFanout) {
      make_node(static_cast<std::uint32_t>(i),
                static_cast<std::uint32_t>(std::min(level_end, i + kFanout)), false);
    }
    level_begin = level_end;
    level_end = nodes_.size();
  }
}

BoxIndex::Bound BoxIndex::upper_bound(const BoxEmbedding& q, std::size_t node) const {
  const double* lower_min = node_bounds_.data() + 3 * dim_ * node;
  const double* upper_max = lower_min + dim_;
  const double* extent_min = upper_max + dim_;
  double enc = 1.0;
  double conc = 1.0;
  for (std::size_t d = 0; d < dim_; ++d) {
    const double ov = std::min(q.upper[d], upper_max[d]) - std::max(q.lower[d], lower_min[d]);
    const double s_ov = sigma(ov, cfg_);
    enc *= std::min(1.0, s_ov / sigma(q.upper[d] - q.lower[d], cfg_));
    const double s_ext = sigma(extent_min[d], cfg_);
    if (s_ext > 0.0) conc *= std::min(1.0, s_ov / s_ext);
  }
  return {enc * (1.0 + kBoundSlack), conc * (1.0 + kBoundSlack)};
}

void BoxIndex::check_query(const BoxEmbedding& q) const {
  if (q.dim() != q.upper.size()) throw ConfigError("query box has inconsistent bounds");
  if (!boxes_.empty() && q.dim() != dim_) {
    throw ConfigError("query dimension " + std::to_string(q.dim()) + " does not match index " +
                      std::to_string(dim_));
  }
  if (cfg_.is_hard() && volume(q, cfg_) <= 0.0) throw GeometryError("degenerate box");
}

QueryResult BoxIndex::score(const BoxEmbedding& q, std::size_t entry) const {
  const double enc = nbo(q, boxes_[entry], cfg_);
  const double conc = nbo(boxes_[entry], q, cfg_);
  return {ids_[entry], enc, conc, 0.5 * (enc + conc)};
}

namespace {

// True when a ranks before b.
bool better(const QueryResult& a, const QueryResult& b) {
  return a.score > b.score || (a.score == b.score && a.id < b.id);
}

}  // namespace

std::vector<QueryResult> BoxIndex::query_topk_exhaustive(const BoxEmbedding& q,
                                                         std::size_t k) const {
  if (k == 0) throw ConfigError("k must be >= 1");
  check_query(q);
  std::vector<QueryResult> all;
  all.reserve(boxes_.size());
  for (std::size_t e = 0; e < boxes_.size(); ++e) all.push_back(score(q, e));
  const std::size_t keep = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(),
                    better);
  all.resize(keep);
  return all;
}

std::vector<QueryResult> BoxIndex::query_topk(const BoxEmbedding& q, std::size_t k) const {
  if (k == 0) throw ConfigError("k must be >= 1");
  check_query(q);
  if (nodes_.empty()) return {};

  // Max-heap on node bound; results kept as a heap with the worst on top.
  using NodeItem = std::pair<double, std::uint32_t>;
  std::priority_queue<NodeItem> frontier;
  std::vector<QueryResult> best;
  auto worse_on_top = [](const QueryResult& a, const QueryResult& b) { return better(a, b); };

  auto node_score = [&](std::size_t node) {
    const Bound b = upper_bound(q, node);
    return 0.5 * (b.enclosure + b.concentration);
  };
  frontier.emplace(node_score(nodes_.size() - 1), static_cast<std::uint32_t>(nodes_.size() - 1));

  while (!frontier.empty()) {
    const auto [bound, node_id] = frontier.top();
    frontier.pop();
    if (bound <= 0.0) break;
    if (best.size() == k && bound < best.front().score) break;
    const Node& node = nodes_[node_id];
    if (!node.leaf) {
      for (std::uint32_t c = node.begin; c < node.end; ++c) {
        frontier.emplace(node_score(c), c);
      }
      continue;
    }
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::size_t e = entry_order_[i];
      QueryResult r = score(q, e);
      if (!(r.score > 0.0)) continue;
      if (best.size() < k) {
        best.push_back(std::move(r));
        std::push_heap(best.begin(), best.end(), worse_on_top);
      } else if (better(r, best.front())) {
        std::pop_heap(best.begin(), best.end(), worse_on_top);
        best.back() = std::move(r);
        std::push_heap(best.begin(), best.end(), worse_on_top);
      }
    }
  }

  std::sort(best.begin(), best.end(), better);
  if (best.size() < k) {
    // Everything not collected scores exactly zero; those rank by id.
    // Owned copies: views into `best` would dangle once it reallocates.
    std::vector<std::string> have;
    for (const auto& r : best) have.push_back(r.id);
    std::sort(have.begin(), have.end());
    for (std::size_t e : by_id_) {
      if (best.size() >= k) break;
      if (std::binary_search(have.begin(), have.end(), ids_[e])) continue;
      best.push_back(score(q, e));
    }
  }
  return best;
}

std::vector<QueryResult> BoxIndex::query_quadrant(const BoxEmbedding& q, ScoreRange enclosure,
                                                  ScoreRange concentration) const {
  check_range(enclosure, "enclosure");
  check_range(concentration, "concentration");
  check_query(q);
  std::vector<std::size_t> hits;
  if (!nodes_.empty()) {
    std::vector<std::uint32_t> stack{static_cast<std::uint32_t>(nodes_.size() - 1)};
    while (!stack.empty()) {
      const std::uint32_t node_id = stack.back();
      const Node& node = nodes_[node_id];
      stack.pop_back();
      const Bound b = upper_bound(q, node_id);
      if (b.enclosure < enclosure.lo || b.concentration < concentration.lo) continue;
      if (!node.leaf) {
        for (std::uint32_t c = node.begin; c < node.end; ++c) stack.push_back(c);
        continue;
      }
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const QueryResult r = score(q, entry_order_[i]);
        if (in_range(r.enclosure, enclosure) && in_range(r.concentration, concentration)) {
          hits.push_back(entry_order_[i]);
        }
      }
    }
  }
  std::sort(hits.begin(), hits.end(),
            [&](std::size_t a, std::size_t b) { return ids_[a] < ids_[b]; });
  std::vector<QueryResult> out;
  out.reserve(hits.size());
  for (std::size_t e : hits) out.push_back(score(q, e));
  return out;
}

}  // namespace boxoverlap
