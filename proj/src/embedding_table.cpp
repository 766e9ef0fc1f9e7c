#include "boxoverlap/embedding_table.hpp"

#include "boxoverlap/error.hpp"

namespace boxoverlap {

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::kBox ? "box" : "vector";
}

ModelKind parse_model_kind(std::string_view s) {
  if (s == "box") return ModelKind::kBox;
  if (s == "vector") return ModelKind::kVector;
  throw ConfigError("unknown model kind '" + std::string(s) + "' (expected box|vector)");
}

EmbeddingTable::EmbeddingTable(ModelKind kind, std::size_t dim) : kind_(kind), dim_(dim) {
  if (dim == 0) throw ConfigError("embedding dimension must be positive");
}

void EmbeddingTable::add(std::string id, std::span<const double> params) {
  if (params.size() != params_per_entry()) {
    throw ConfigError("entry '" + id + "' has " + std::to_string(params.size()) +
                      " parameters, expected " + std::to_string(params_per_entry()));
  }
  if (index_.count(id) != 0) throw ConfigError("duplicate image id '" + id + "'");
  index_.emplace(id, ids_.size());
  ids_.push_back(std::move(id));
  values_.insert(values_.end(), params.begin(), params.end());
}

bool EmbeddingTable::contains(std::string_view id) const {
  return index_.count(std::string(id)) != 0;
}

std::size_t EmbeddingTable::index_of(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) throw ConfigError("unknown image id '" + std::string(id) + "'");
  return it->second;
}

std::span<const double> EmbeddingTable::params(std::size_t i) const {
  return std::span<const double>(values_).subspan(i * params_per_entry(), params_per_entry());
}

std::span<double> EmbeddingTable::params(std::size_t i) {
  return std::span<double>(values_).subspan(i * params_per_entry(), params_per_entry());
}

void EmbeddingTable::require_kind(ModelKind k) const {
  if (kind_ != k) {
    throw ConfigError("embedding table holds " + std::string(to_string(kind_)) +
                      " entries, " + std::string(to_string(k)) + " required");
  }
}

BoxParams EmbeddingTable::box_params(std::size_t i) const {
  require_kind(ModelKind::kBox);
  const auto p = params(i);
  return {{p.begin(), p.begin() + dim_}, {p.begin() + dim_, p.end()}};
}

BoxEmbedding EmbeddingTable::box(std::size_t i) const { return params_to_box(box_params(i)); }

}  // namespace boxoverlap
