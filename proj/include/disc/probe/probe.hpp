#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "disc/disnet/network.hpp"
#include "disc/gradcore/tensor.hpp"

namespace disc::probe {

/// Row-major n x d embeddings, each row tagged with the shot (or image) it
/// came from.
class EmbeddingIndex {
public:
  EmbeddingIndex(std::size_t dim, net::EmbeddingSpace space);

  void add(std::size_t ref, std::span<const float> embedding);

  std::size_t size() const noexcept { return refs_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  net::EmbeddingSpace space() const noexcept { return space_; }
  std::span<const float> row(std::size_t i) const;
  std::size_t ref(std::size_t i) const { return refs_.at(i); }
  const std::vector<std::size_t> &refs() const noexcept { return refs_; }

private:
  std::size_t dim_;
  net::EmbeddingSpace space_;
  std::vector<float> data_;
  std::vector<std::size_t> refs_;
};

/// Eval-mode embeddings of images[refs[i]], one row each.
EmbeddingIndex build_index(const net::NetSpec &spec, const net::ParameterStore<float> &params,
                           const std::vector<Tensor<float>> &images, const std::vector<std::size_t> &refs,
                           net::EmbeddingSpace space);

double euclidean(std::span<const float> a, std::span<const float> b);

struct Neighbor {
  std::size_t row = 0;
  std::size_t ref = 0;
  double distance = 0.0;

  friend bool operator==(const Neighbor &, const Neighbor &) = default;
};

/// Exact k nearest rows by Euclidean distance, ties broken by row order. Rows
/// whose ref equals `exclude_ref` are skipped. Throws std::invalid_argument
/// when fewer than k rows are eligible.
std::vector<Neighbor> knn_retrieve(const EmbeddingIndex &index, std::span<const float> query, std::size_t k,
                                   std::optional<std::size_t> exclude_ref = std::nullopt);

/// Neighbours of every row of the index against the index itself, each row
/// excluding itself.
std::vector<std::vector<Neighbor>> knn_self(const EmbeddingIndex &index, std::size_t k);

enum class RatioStatus { Defined, Infinite, Undefined };

struct DistanceStats {
  std::vector<std::size_t> categories; ///< sorted label values, one per matrix row
  std::vector<std::size_t> members;
  /// K x K mean pairwise distances; a diagonal entry is NaN when its category
  /// has fewer than two members.
  std::vector<std::vector<double>> matrix;
  std::optional<double> mean_within;
  std::optional<double> mean_between;
  std::optional<double> ratio; ///< set only when status is Defined
  RatioStatus status = RatioStatus::Undefined;
};

/// Mean within- and between-category distances. Requires at least two
/// categories; a category with one member gets a warning and is left out of
/// the within mean.
DistanceStats distance_stats(const EmbeddingIndex &index, const std::vector<std::size_t> &labels);

/// Header row "category,<c0>,<c1>,...", then one row per category.
void write_distance_csv(const std::filesystem::path &path, const DistanceStats &stats);
/// Grayscale map with `cell` x `cell` pixels per entry; brightness rises
/// linearly from the smallest to the largest defined entry, undefined entries
/// are black.
void write_distance_heatmap(const std::filesystem::path &path, const DistanceStats &stats, std::size_t cell = 8);

struct RetrievalRow {
  std::size_t query_ref = 0;
  std::vector<Neighbor> neighbors;
};

/// One row per query: the query image, then its neighbours left to right,
/// separated by white gutters. Images are 3 x H x W in [0, 1].
void write_retrieval_grid(const std::filesystem::path &path, const std::vector<RetrievalRow> &rows,
                          const std::vector<Tensor<float>> &images, std::size_t gutter = 2);

/// Header row "true\predicted,<0>,<1>,...", then one row per true class.
void write_confusion_csv(const std::filesystem::path &path, const std::vector<std::vector<std::size_t>> &confusion);

} // namespace disc::probe
