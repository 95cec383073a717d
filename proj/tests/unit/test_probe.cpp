#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <omp.h>
#include <sstream>

#include "disc/common/image_io.hpp"
#include "disc/common/log.hpp"
#include "disc/errors.hpp"
#include "disc/gradcore/rng.hpp"
#include "disc/probe/probe.hpp"

using namespace disc;
using namespace disc::probe;

namespace {

EmbeddingIndex random_index(std::size_t n, std::size_t d, std::uint64_t seed, bool coarse = false) {
  Rng rng(seed);
  EmbeddingIndex index(d, net::EmbeddingSpace::Full);
  std::vector<float> row(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto &v : row)
      v = coarse ? static_cast<float>(uniform_index(rng, 3)) : static_cast<float>(standard_normal(rng));
    index.add(i, row);
  }
  return index;
}

// Full sort of every eligible row by (distance, row).
std::vector<Neighbor> brute_force(const EmbeddingIndex &index, std::span<const float> q, std::size_t k,
                                  std::optional<std::size_t> exclude) {
  std::vector<Neighbor> all;
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (exclude && index.ref(i) == *exclude)
      continue;
    double s = 0;
    for (std::size_t j = 0; j < index.dim(); ++j) {
      const double d = double(index.row(i)[j]) - double(q[j]);
      s += d * d;
    }
    all.push_back({i, index.ref(i), std::sqrt(s)});
  }
  std::stable_sort(all.begin(), all.end(), [](const Neighbor &a, const Neighbor &b) { return a.distance < b.distance; });
  all.resize(k);
  return all;
}

std::string slurp(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path temp_dir() {
  auto p = std::filesystem::temp_directory_path() /
           ("disc_probe_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

TEST(Knn, MatchesBruteForceSmall) {
  const auto index = random_index(50, 8, 1);
  Rng rng(2);
  std::vector<float> q(8);
  for (int t = 0; t < 20; ++t) {
    for (auto &v : q)
      v = static_cast<float>(standard_normal(rng));
    for (std::size_t k : {1u, 5u, 50u})
      EXPECT_EQ(knn_retrieve(index, q, k), brute_force(index, q, k, std::nullopt));
    const std::size_t self = uniform_index(rng, 50);
    EXPECT_EQ(knn_retrieve(index, index.row(self), 49, self), brute_force(index, index.row(self), 49, self));
  }
}

TEST(Knn, MatchesBruteForceOnThousandRows) {
  const auto index = random_index(1000, 16, 3);
  const auto all = knn_self(index, 5);
  for (std::size_t i = 0; i < index.size(); ++i)
    ASSERT_EQ(all[i], brute_force(index, index.row(i), 5, i)) << i;
}

TEST(Knn, TiesFollowInsertionOrder) {
  // Entries in {0,1,2} make many equal distances.
  const auto index = random_index(200, 2, 4, true);
  for (std::size_t i = 0; i < 20; ++i) {
    const auto got = knn_retrieve(index, index.row(i), 30, i);
    EXPECT_EQ(got, brute_force(index, index.row(i), 30, i));
    for (std::size_t j = 1; j < got.size(); ++j)
      if (got[j].distance == got[j - 1].distance) {
        EXPECT_LT(got[j - 1].row, got[j].row);
      }
  }
}

TEST(Knn, DuplicateRanksFirstWhenSelfExcluded) {
  auto index = random_index(30, 4, 5);
  const std::vector<float> copy(index.row(7).begin(), index.row(7).end());
  index.add(30, copy);
  const auto got = knn_retrieve(index, index.row(7), 1, 7);
  EXPECT_EQ(got[0].ref, 30u);
  EXPECT_EQ(got[0].distance, 0.0);
}

TEST(Knn, RejectsTooLargeK) {
  const auto index = random_index(10, 3, 6);
  EXPECT_THROW(knn_retrieve(index, index.row(0), 11), std::invalid_argument);
  EXPECT_THROW(knn_retrieve(index, index.row(0), 10, 0), std::invalid_argument);
  EXPECT_NO_THROW(knn_retrieve(index, index.row(0), 9, 0));
  EXPECT_THROW(knn_self(index, 10), std::invalid_argument);
  EXPECT_THROW(index.row(10), std::out_of_range);
  EmbeddingIndex bad(3, net::EmbeddingSpace::Identity);
  EXPECT_THROW(bad.add(0, std::vector<float>(4)), std::invalid_argument);
}

std::vector<std::vector<double>> oracle_matrix(const EmbeddingIndex &index, const std::vector<std::size_t> &labels,
                                               std::size_t K) {
  std::vector<std::vector<double>> sum(K, std::vector<double>(K, 0.0)), count = sum;
  for (std::size_t i = 0; i < index.size(); ++i)
    for (std::size_t j = 0; j < index.size(); ++j) {
      if (i == j)
        continue;
      double s = 0;
      for (std::size_t d = 0; d < index.dim(); ++d)
        s += std::pow(double(index.row(i)[d]) - double(index.row(j)[d]), 2);
      sum[labels[i]][labels[j]] += std::sqrt(s);
      count[labels[i]][labels[j]] += 1;
    }
  for (std::size_t a = 0; a < K; ++a)
    for (std::size_t b = 0; b < K; ++b)
      sum[a][b] = count[a][b] ? sum[a][b] / count[a][b] : NAN;
  return sum;
}

TEST(Stats, MatchesDoubleLoopOracle) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Rng rng(seed);
    const auto index = random_index(60 + 20 * seed, 5, seed);
    std::vector<std::size_t> labels(index.size());
    for (auto &l : labels)
      l = uniform_index(rng, 3);
    const auto s = distance_stats(index, labels);
    const auto o = oracle_matrix(index, labels, 3);
    ASSERT_EQ(s.categories, (std::vector<std::size_t>{0, 1, 2}));
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 3; ++b) {
        EXPECT_NEAR(s.matrix[a][b], o[a][b], 1e-9);
        EXPECT_EQ(s.matrix[a][b], s.matrix[b][a]);
        EXPECT_GE(s.matrix[a][b], 0.0);
      }
    // Pair-count weighted aggregates.
    double w = 0, wn = 0, bsum = 0, bn = 0;
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 3; ++b) {
        const double na = double(s.members[a]), nb = double(s.members[b]);
        if (a == b) {
          w += o[a][a] * na * (na - 1);
          wn += na * (na - 1);
        } else {
          bsum += o[a][b] * na * nb;
          bn += na * nb;
        }
      }
    EXPECT_NEAR(*s.mean_within, w / wn, 1e-9);
    EXPECT_NEAR(*s.mean_between, bsum / bn, 1e-9);
    EXPECT_EQ(s.status, RatioStatus::Defined);
    EXPECT_NEAR(*s.ratio, *s.mean_between / *s.mean_within, 1e-12);
    EXPECT_GT(*s.ratio, 0.0);
  }
}

TEST(Stats, TwoPointClusters) {
  EmbeddingIndex index(1, net::EmbeddingSpace::Identity);
  const float zero = 0.0f, one = 1.0f;
  index.add(0, {&zero, 1});
  index.add(1, {&zero, 1});
  index.add(2, {&one, 1});
  index.add(3, {&one, 1});
  const auto s = distance_stats(index, {4, 4, 9, 9});
  EXPECT_EQ(s.categories, (std::vector<std::size_t>{4, 9}));
  EXPECT_EQ(*s.mean_within, 0.0);
  EXPECT_EQ(*s.mean_between, 1.0);
  EXPECT_EQ(s.status, RatioStatus::Infinite);
  EXPECT_FALSE(s.ratio.has_value());
}

TEST(Stats, IdenticalEmbeddingsAreUndefined) {
  EmbeddingIndex index(2, net::EmbeddingSpace::Full);
  const std::vector<float> v{0.5f, -1.0f};
  for (std::size_t i = 0; i < 6; ++i)
    index.add(i, v);
  const auto s = distance_stats(index, {0, 0, 1, 1, 2, 2});
  for (const auto &row : s.matrix)
    for (double x : row)
      EXPECT_EQ(x, 0.0);
  EXPECT_EQ(s.status, RatioStatus::Undefined);
  EXPECT_FALSE(s.ratio.has_value());
}

TEST(Stats, SingletonCategoryWarnsAndIsExcluded) {
  const auto index = random_index(7, 3, 8);
  std::vector<std::string> warnings;
  const auto previous = set_warning_sink([&](const std::string &m) { warnings.push_back(m); });
  const auto s = distance_stats(index, {0, 0, 0, 1, 1, 1, 2});
  set_warning_sink(previous);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("category 2"), std::string::npos);
  EXPECT_TRUE(std::isnan(s.matrix[2][2]));
  EXPECT_FALSE(std::isnan(s.matrix[2][0]));
  const auto o = oracle_matrix(index, {0, 0, 0, 1, 1, 1, 2}, 3);
  EXPECT_NEAR(*s.mean_within, (o[0][0] + o[1][1]) / 2, 1e-12); // three pairs each
  EXPECT_THROW(distance_stats(index, {0, 0, 0, 0, 0, 0, 0}), std::invalid_argument);
  EXPECT_THROW(distance_stats(index, {0, 1}), std::invalid_argument);
}

TEST(Stats, PermutationAndThreadInvariance) {
  const auto index = random_index(90, 6, 9);
  Rng rng(10);
  std::vector<std::size_t> labels(90);
  for (auto &l : labels)
    l = uniform_index(rng, 4);
  const auto s = distance_stats(index, labels);
  std::vector<std::size_t> perm(90);
  std::iota(perm.begin(), perm.end(), 0);
  shuffle_in_place(perm, rng);
  EmbeddingIndex shuffled(6, net::EmbeddingSpace::Full);
  std::vector<std::size_t> shuffled_labels;
  for (auto p : perm) {
    shuffled.add(p, index.row(p));
    shuffled_labels.push_back(labels[p]);
  }
  const auto t = distance_stats(shuffled, shuffled_labels);
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = 0; b < 4; ++b)
      EXPECT_NEAR(s.matrix[a][b], t.matrix[a][b], 1e-12);
  EXPECT_NEAR(*s.ratio, *t.ratio, 1e-12);

  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto one = distance_stats(index, labels);
  omp_set_num_threads(4);
  const auto four = distance_stats(index, labels);
  omp_set_num_threads(saved);
  EXPECT_EQ(one.matrix, four.matrix);
}

DistanceStats ten_category_stats() {
  const auto index = random_index(40, 3, 11);
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < 40; ++i)
    labels.push_back(i % 10);
  return distance_stats(index, labels);
}

TEST(Export, DistanceCsvLayoutAndDeterminism) {
  const auto dir = temp_dir();
  const auto s = ten_category_stats();
  write_distance_csv(dir / "a.csv", s);
  write_distance_csv(dir / "b.csv", s);
  const auto text = slurp(dir / "a.csv");
  EXPECT_EQ(text, slurp(dir / "b.csv"));
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 11);
  EXPECT_EQ(text.substr(0, text.find('\n')), "category,0,1,2,3,4,5,6,7,8,9");
  std::istringstream lines(text);
  std::string line;
  std::getline(lines, line);
  std::getline(lines, line);
  EXPECT_EQ(std::count(line.begin(), line.end(), ','), 10);
  EXPECT_THROW(write_distance_csv("/nonexistent/dir/x.csv", s), IoError);
  std::filesystem::remove_all(dir);
}

TEST(Export, HeatmapIsMonotoneInEntries) {
  const auto dir = temp_dir();
  const auto s = ten_category_stats();
  write_distance_heatmap(dir / "h.pgm", s, 4);
  const auto img = read_pnm(dir / "h.pgm");
  ASSERT_EQ(img.shape(), (Shape{1, 40, 40}));
  std::vector<std::pair<double, float>> cells;
  for (std::size_t a = 0; a < 10; ++a)
    for (std::size_t b = 0; b < 10; ++b) {
      const float p = img[(a * 4 + 1) * 40 + b * 4 + 2];
      EXPECT_EQ(p, img[(a * 4) * 40 + b * 4]); // uniform cell
      cells.push_back({s.matrix[a][b], p});
    }
  for (const auto &[v1, p1] : cells)
    for (const auto &[v2, p2] : cells)
      if (v1 < v2) {
        EXPECT_LE(p1, p2);
      }
  const auto [lo, hi] = std::minmax_element(cells.begin(), cells.end());
  EXPECT_EQ(lo->second, 0.0f);
  EXPECT_EQ(hi->second, 1.0f);
  const auto first = slurp(dir / "h.pgm");
  write_distance_heatmap(dir / "h.pgm", s, 4);
  EXPECT_EQ(first, slurp(dir / "h.pgm"));
  std::filesystem::remove_all(dir);
}

TEST(Export, RetrievalGridLayout) {
  const auto dir = temp_dir();
  std::vector<Tensor<float>> images;
  for (int i = 0; i < 4; ++i)
    images.emplace_back(Shape{3, 5, 6}, 0.2f * static_cast<float>(i));
  std::vector<RetrievalRow> rows{{0, {{0, 1, 0.5}, {0, 2, 0.7}}}, {3, {{0, 0, 0.1}, {0, 1, 0.2}}}};
  write_retrieval_grid(dir / "r.ppm", rows, images, 2);
  const auto img = read_pnm(dir / "r.ppm");
  ASSERT_EQ(img.shape(), (Shape{3, 2 * 5 + 3 * 2, 3 * 6 + 4 * 2}));
  const std::size_t W = 26, H = 16;
  const auto at = [&](std::size_t c, std::size_t y, std::size_t x) { return img[(c * H + y) * W + x]; };
  EXPECT_EQ(at(0, 0, 0), 1.0f);                           // gutter
  EXPECT_EQ(at(1, 2, 2), quantize_level(0.0f));           // query 0
  EXPECT_EQ(at(1, 2, 2 + 8), quantize_level(0.2f));       // first neighbour
  EXPECT_EQ(at(2, 2 + 7, 2 + 16), quantize_level(0.2f));  // row 2, second neighbour is image 1
  EXPECT_EQ(at(0, 2 + 7, 2), quantize_level(0.6f));       // query 3
  EXPECT_THROW(write_retrieval_grid(dir / "r.ppm", {}, images), std::invalid_argument);
  std::filesystem::remove_all(dir);
}

TEST(Export, ConfusionCsv) {
  const auto dir = temp_dir();
  write_confusion_csv(dir / "c.csv", {{3, 1}, {0, 4}});
  EXPECT_EQ(slurp(dir / "c.csv"), "true\\predicted,0,1\n0,3,1\n1,0,4\n");
  std::filesystem::remove_all(dir);
}

TEST(Index, BuildIndexMatchesExtraction) {
  const auto spec = net::desk_preset(4, 3);
  const auto params = net::init_parameters<float>(spec, 3);
  std::vector<Tensor<float>> images;
  Rng rng(12);
  for (int i = 0; i < 5; ++i) {
    Tensor<float> t(Shape{3, 32, 32});
    for (auto &v : t.values())
      v = static_cast<float>(standard_normal(rng));
    images.push_back(std::move(t));
  }
  const std::vector<std::size_t> refs{4, 0, 2};
  const auto index = build_index(spec, params, images, refs, net::EmbeddingSpace::Identity);
  EXPECT_EQ(index.dim(), 64u);
  EXPECT_EQ(index.refs(), refs);
  const net::Network<float> network(spec);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto e = network.extract_embedding(params, images[refs[i]], net::EmbeddingSpace::Identity);
    EXPECT_TRUE(std::equal(e.values().begin(), e.values().end(), index.row(i).begin()));
  }
  EXPECT_THROW(build_index(spec, params, images, {5}, net::EmbeddingSpace::Full), std::out_of_range);
}

} // namespace
