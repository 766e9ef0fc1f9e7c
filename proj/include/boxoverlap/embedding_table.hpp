#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "boxoverlap/box.hpp"

namespace boxoverlap {

enum class ModelKind { kBox, kVector };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view s);

// Per-image embedding parameters stored contiguously.
//
// Box entries hold [center(D), size_raw(D)]; vector entries hold D values.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(ModelKind kind, std::size_t dim);

  ModelKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  std::size_t params_per_entry() const { return kind_ == ModelKind::kBox ? 2 * dim_ : dim_; }

  // Throws ConfigError on a duplicate id or wrong parameter count.
  void add(std::string id, std::span<const double> params);

  const std::vector<std::string>& ids() const { return ids_; }
  bool contains(std::string_view id) const;
  // Throws ConfigError("unknown image id ...") when absent.
  std::size_t index_of(std::string_view id) const;

  std::span<const double> params(std::size_t i) const;
  std::span<double> params(std::size_t i);
  std::span<const double> flat() const { return values_; }
  std::span<double> flat() { return values_; }

  BoxParams box_params(std::size_t i) const;
  BoxEmbedding box(std::size_t i) const;

 private:
  void require_kind(ModelKind k) const;

  ModelKind kind_ = ModelKind::kBox;
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> values_;
};

}  // namespace boxoverlap
