#include "disc/probe/probe.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "disc/common/log.hpp"

namespace disc::probe {

EmbeddingIndex::EmbeddingIndex(std::size_t dim, net::EmbeddingSpace space) : dim_(dim), space_(space) {
  if (dim == 0)
    throw std::invalid_argument("embedding dimension must be positive");
}

void EmbeddingIndex::add(std::size_t ref, std::span<const float> embedding) {
  if (embedding.size() != dim_)
    throw std::invalid_argument("embedding has " + std::to_string(embedding.size()) + " values, index holds " +
                                std::to_string(dim_));
  data_.insert(data_.end(), embedding.begin(), embedding.end());
  refs_.push_back(ref);
}

std::span<const float> EmbeddingIndex::row(std::size_t i) const {
  if (i >= refs_.size())
    throw std::out_of_range("index row " + std::to_string(i) + " out of range");
  return {data_.data() + i * dim_, dim_};
}

EmbeddingIndex build_index(const net::NetSpec &spec, const net::ParameterStore<float> &params,
                           const std::vector<Tensor<float>> &images, const std::vector<std::size_t> &refs,
                           net::EmbeddingSpace space) {
  const net::Network<float> network(spec);
  for (auto r : refs)
    if (r >= images.size())
      throw std::out_of_range("image " + std::to_string(r) + " out of range");
  std::vector<Tensor<float>> rows(refs.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(refs.size()); ++i) {
    try {
      rows[i] = network.extract_embedding(params, images[refs[i]], space);
    } catch (...) {
#pragma omp critical
      if (!failure)
        failure = std::current_exception();
    }
  }
  if (failure)
    std::rethrow_exception(failure);
  const std::size_t dim = rows.empty() ? network.extract_embedding(params, images.at(0), space).size()
                                       : rows.front().size();
  EmbeddingIndex index(dim, space);
  for (std::size_t i = 0; i < refs.size(); ++i)
    index.add(refs[i], rows[i].values());
  return index;
}

double euclidean(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("embedding sizes differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return std::sqrt(sum);
}

std::vector<Neighbor> knn_retrieve(const EmbeddingIndex &index, std::span<const float> query, std::size_t k,
                                   std::optional<std::size_t> exclude_ref) {
  std::vector<Neighbor> all;
  all.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (exclude_ref && index.ref(i) == *exclude_ref)
      continue;
    all.push_back({i, index.ref(i), euclidean(index.row(i), query)});
  }
  if (k > all.size())
    throw std::invalid_argument("k = " + std::to_string(k) + " exceeds the " + std::to_string(all.size()) +
                                " eligible rows");
  const auto closer = [](const Neighbor &a, const Neighbor &b) {
    return a.distance != b.distance ? a.distance < b.distance : a.row < b.row;
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), closer);
  all.resize(k);
  return all;
}

std::vector<std::vector<Neighbor>> knn_self(const EmbeddingIndex &index, std::size_t k) {
  if (index.size() == 0 || k > index.size() - 1)
    throw std::invalid_argument("k = " + std::to_string(k) + " needs at least " + std::to_string(k + 1) + " rows");
  std::vector<std::vector<Neighbor>> out(index.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(index.size()); ++i) {
    // Exclude by row rather than ref, so repeated refs still see each other.
    std::vector<Neighbor> all;
    all.reserve(index.size() - 1);
    for (std::size_t j = 0; j < index.size(); ++j)
      if (j != static_cast<std::size_t>(i))
        all.push_back({j, index.ref(j), euclidean(index.row(j), index.row(i))});
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                      [](const Neighbor &a, const Neighbor &b) {
                        return a.distance != b.distance ? a.distance < b.distance : a.row < b.row;
                      });
    all.resize(k);
    out[i] = std::move(all);
  }
  return out;
}

DistanceStats distance_stats(const EmbeddingIndex &index, const std::vector<std::size_t> &labels) {
  if (labels.size() != index.size())
    throw std::invalid_argument("got " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(index.size()) + " rows");
  DistanceStats s;
  std::map<std::size_t, std::size_t> slot;
  for (auto l : labels)
    slot.emplace(l, 0);
  if (slot.size() < 2)
    throw std::invalid_argument("distance statistics need at least two categories");
  for (auto &[label, k] : slot) {
    k = s.categories.size();
    s.categories.push_back(label);
  }
  const std::size_t K = s.categories.size(), n = index.size();
  std::vector<std::size_t> cls(n);
  s.members.assign(K, 0);
  for (std::size_t i = 0; i < n; ++i) {
    cls[i] = slot.at(labels[i]);
    ++s.members[cls[i]];
  }

  // Row i accumulates its distances to every later row by that row's class;
  // the rows are then folded in order so the sums do not depend on threads.
  std::vector<double> row_sums(n * K, 0.0);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    for (std::size_t j = static_cast<std::size_t>(i) + 1; j < n; ++j)
      row_sums[i * K + cls[j]] += euclidean(index.row(i), index.row(j));

  std::vector<double> sums(K * K, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < K; ++c) {
      const std::size_t a = std::min(cls[i], c), b = std::max(cls[i], c);
      sums[a * K + b] += row_sums[i * K + c];
    }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  s.matrix.assign(K, std::vector<double>(K, nan));
  double within = 0.0, between = 0.0;
  double within_pairs = 0.0, between_pairs = 0.0;
  for (std::size_t a = 0; a < K; ++a)
    for (std::size_t b = a; b < K; ++b) {
      const double na = static_cast<double>(s.members[a]), nb = static_cast<double>(s.members[b]);
      const double pairs = a == b ? na * (na - 1) / 2 : na * nb;
      if (pairs == 0) {
        warn("category " + std::to_string(s.categories[a]) +
             " has a single member; its within-category distance is undefined");
        continue;
      }
      const double mean = sums[a * K + b] / pairs;
      s.matrix[a][b] = s.matrix[b][a] = mean;
      if (a == b) {
        within += sums[a * K + b];
        within_pairs += pairs;
      } else {
        between += sums[a * K + b];
        between_pairs += pairs;
      }
    }
  if (within_pairs > 0)
    s.mean_within = within / within_pairs;
  s.mean_between = between / between_pairs;
  if (!s.mean_within || *s.mean_between == 0.0) {
    s.status = RatioStatus::Undefined;
  } else if (*s.mean_within == 0.0) {
    s.status = RatioStatus::Infinite;
  } else {
    s.status = RatioStatus::Defined;
    s.ratio = *s.mean_between / *s.mean_within;
  }
  return s;
}

} // namespace disc::probe
