#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "disc/common/log.hpp"
#include "disc/errors.hpp"
#include "disc/gradcore/rng.hpp"
#include "disc/pairgen/manifest.hpp"
#include "disc/pairgen/scale.hpp"

using namespace disc;
using namespace disc::pairs;

namespace {

const ViewpointGrid ilab_grid{11, 8, false};

std::vector<Shot> grid_shots(int instances, const ViewpointGrid &grid, int categories = 1) {
  std::vector<Shot> shots;
  for (int i = 0; i < instances; ++i)
    for (int c = 0; c < grid.cameras; ++c)
      for (int r = 0; r < grid.rotations; ++r)
        shots.push_back({i, i % categories, c, r, 0, 0, 0, 0, "img_" + std::to_string(shots.size())});
  return shots;
}

std::set<int> all_instances(const std::vector<Shot> &shots) {
  std::set<int> s;
  for (const auto &shot : shots)
    s.insert(shot.instance);
  return s;
}

// Independent relation test written from the definitions, not shared with the
// library: returns true if `right` is `left` moved by `rel` on `grid`.
bool oracle_relation(const PairDescriptor &d, const ViewpointGrid *grid, const Shot &l, const Shot &r) {
  if (l.instance != r.instance || l.lighting != r.lighting || l.focus != r.focus)
    return false;
  if (const auto *g = std::get_if<GridRelation>(&d)) {
    if (l.sequence != r.sequence || l.frame != r.frame)
      return false;
    if (g->anchor_camera && l.camera != *g->anchor_camera)
      return false;
    if (r.camera - l.camera != g->cam_offset)
      return false;
    if (!grid->rotation_wraps)
      return r.rotation - l.rotation == g->rot_offset;
    for (int k = -4; k <= 4; ++k)
      if (r.rotation - l.rotation == g->rot_offset + k * grid->rotations)
        return true;
    return false;
  }
  const auto &v = std::get<VideoRelation>(d);
  return l.camera == r.camera && l.sequence == v.sequence && r.sequence == v.sequence && r.frame - l.frame == v.delta;
}

using Triple = std::tuple<std::size_t, std::size_t, std::size_t>;

std::multiset<Triple> brute_force(const std::vector<Shot> &shots, const CameraPairSet &set,
                                  const std::set<int> &instances, int every = 1) {
  std::multiset<Triple> out;
  const ViewpointGrid *grid = set.grid ? &*set.grid : nullptr;
  for (std::size_t i = 0; i < shots.size(); ++i)
    for (std::size_t j = 0; j < shots.size(); ++j) {
      if (!instances.contains(shots[i].instance) || !instances.contains(shots[j].instance))
        continue;
      if (shots[i].frame % every != 0 || shots[j].frame % every != 0)
        continue;
      std::vector<std::size_t> labels;
      for (std::size_t k = 0; k < set.size(); ++k)
        if (oracle_relation(set.descriptors[k], grid, shots[i], shots[j]))
          labels.push_back(k);
      if (labels.size() == 1)
        out.insert({i, j, labels[0]});
    }
  return out;
}

std::multiset<Triple> as_triples(const std::vector<PairedExample> &pairs) {
  std::multiset<Triple> out;
  for (const auto &p : pairs)
    out.insert({p.left, p.right, p.pose_label});
  return out;
}

// ---- label spaces

TEST(GridPresets, LabelCountsOnElevenByEight) {
  EXPECT_EQ(enumerate_grid_pairs(ilab_grid, "ilab-case1").size(), 7u);
  EXPECT_EQ(enumerate_grid_pairs(ilab_grid, "ilab-case2").size(), 11u);
  EXPECT_EQ(enumerate_grid_pairs(ilab_grid, "ilab-case3").size(), 18u);
  EXPECT_EQ(enumerate_grid_pairs(ilab_grid, "ilab-case4").size(), 56u);
}

TEST(GridPresets, MatchFrozenFixture) {
  const auto fixture = read_preset_fixture(std::filesystem::path(DISC_DATA_DIR) / "camera_pairs.json");
  EXPECT_EQ(fixture.grid, ilab_grid);
  ASSERT_EQ(fixture.presets.size(), 4u);
  for (const auto &[name, relations] : fixture.presets)
    EXPECT_EQ(preset_relations(fixture.grid, name), relations) << name;
}

TEST(GridPresets, DeskPresets) {
  const ViewpointGrid desk{8, 8, false};
  EXPECT_EQ(enumerate_grid_pairs(desk, "desk-3").size(), 3u);
  EXPECT_EQ(enumerate_grid_pairs(desk, "desk-6").size(), 6u);
  EXPECT_EQ(enumerate_grid_pairs(desk, "ilab-case2").size(), 8u);
  EXPECT_THROW(enumerate_grid_pairs(desk, "case9"), ConfigError);
}

TEST(VideoPairs, LabelCountsWithThreeSequences) {
  const std::vector<VideoSequence> seqs{{0, 60}, {1, 60}, {2, 60}};
  EXPECT_EQ(enumerate_video_pairs(seqs, {5}).size(), 3u);
  EXPECT_EQ(enumerate_video_pairs(seqs, {5, 10}).size(), 6u);
  EXPECT_EQ(enumerate_video_pairs(seqs, {5, 10, 15}).size(), 9u);
  EXPECT_EQ(enumerate_video_pairs(seqs, {5, 10, 15, 20}).size(), 12u);
  const auto set = enumerate_video_pairs(seqs, {5, 10});
  EXPECT_EQ(std::get<VideoRelation>(set.descriptors[3]), (VideoRelation{10, 0}));
}

TEST(VideoPairs, Rejections) {
  const std::vector<VideoSequence> seqs{{0, 10}, {1, 12}};
  EXPECT_THROW(enumerate_video_pairs(seqs, {0}), ConfigError);
  EXPECT_THROW(enumerate_video_pairs(seqs, {-2}), ConfigError);
  EXPECT_THROW(enumerate_video_pairs(seqs, {12}), ConfigError);
  EXPECT_THROW(enumerate_video_pairs(seqs, {3, 3}), ConfigError);
  EXPECT_NO_THROW(enumerate_video_pairs(seqs, {11}));
}

TEST(VideoPairs, SingleSequenceGapOne) {
  std::vector<Shot> shots;
  for (int f = 0; f < 10; ++f)
    shots.push_back({0, 0, 0, 0, 0, f, 0, 0, ""});
  const auto set = enumerate_video_pairs({{0, 10}}, {1});
  EXPECT_EQ(set.size(), 1u);
  const auto pairs = generate_pairs(shots, set, {0});
  EXPECT_EQ(pairs.size(), 9u);
  EXPECT_EQ(as_triples(pairs), brute_force(shots, set, {0}));
}

TEST(VideoPairs, SubsamplingKeepsOriginalFrameGaps) {
  std::vector<Shot> shots;
  for (int s = 0; s < 3; ++s)
    for (int f = 0; f < 40; ++f)
      shots.push_back({0, 0, s, f, s, f, 0, 0, ""});
  const auto set = enumerate_video_pairs({{0, 40}, {1, 40}, {2, 40}}, {5, 10});
  const auto pairs = generate_pairs(shots, set, {0}, {5});
  // Kept frames 0, 5, ..., 35: 7 gaps of 5 and 6 gaps of 10 per sequence.
  EXPECT_EQ(pairs.size(), 3u * (7 + 6));
  EXPECT_EQ(as_triples(pairs), brute_force(shots, set, {0}, 5));
  for (const auto &p : pairs)
    EXPECT_EQ(shots[p.left].frame % 5, 0);
}

TEST(GridRelations, CustomListIsReturnedVerbatim) {
  const ViewpointGrid line{3, 1, false};
  const auto set = enumerate_grid_pairs(line, std::vector<GridRelation>{{1, 0, {}}});
  ASSERT_EQ(set.size(), 1u);
  const auto shots = grid_shots(1, line);
  const auto pairs = generate_pairs(shots, set, {0});
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(shots[pairs[0].left].camera, 0);
  EXPECT_EQ(shots[pairs[0].right].camera, 1);
  EXPECT_EQ(shots[pairs[1].left].camera, 1);
  EXPECT_EQ(shots[pairs[1].right].camera, 2);
  EXPECT_EQ(pairs[0].pose_label, 0u);
  EXPECT_EQ(pairs[1].pose_label, 0u);
}

TEST(GridRelations, Rejections) {
  const ViewpointGrid desk{8, 8, false};
  EXPECT_THROW(enumerate_grid_pairs(desk, std::vector<GridRelation>{{0, 8, {}}}), ConfigError);
  EXPECT_THROW(enumerate_grid_pairs(desk, std::vector<GridRelation>{{8, 0, {}}}), ConfigError);
  EXPECT_THROW(enumerate_grid_pairs(desk, std::vector<GridRelation>{{1, 0, 7}}), ConfigError);
  EXPECT_THROW(enumerate_grid_pairs(desk, std::vector<GridRelation>{{0, 0, {}}}), ConfigError);
  EXPECT_THROW(enumerate_grid_pairs(desk, std::vector<GridRelation>{{1, 0, {}}, {1, 0, {}}}), ConfigError);
  // An anchored relation overlapping its unanchored twin is ambiguous.
  EXPECT_THROW(enumerate_grid_pairs(desk, std::vector<GridRelation>{{1, 0, {}}, {1, 0, 2}}), ConfigError);
  EXPECT_THROW(enumerate_grid_pairs(desk, std::vector<GridRelation>{}), ConfigError);
  const ViewpointGrid wrap{8, 8, true};
  EXPECT_NO_THROW(enumerate_grid_pairs(wrap, std::vector<GridRelation>{{0, 9, {}}}));
  EXPECT_THROW(enumerate_grid_pairs(wrap, std::vector<GridRelation>{{0, 1, {}}, {0, 9, {}}}), ConfigError);
  EXPECT_THROW(enumerate_grid_pairs(wrap, std::vector<GridRelation>{{0, 8, {}}}), ConfigError);
  EXPECT_THROW(enumerate_grid_pairs(ViewpointGrid{0, 8, false}, "desk-3"), ConfigError);
}

// ---- pair generation against the brute-force oracle

TEST(GeneratePairs, CaseTwoSingleInstanceIs77) {
  const auto shots = grid_shots(1, ilab_grid);
  const auto set = enumerate_grid_pairs(ilab_grid, "ilab-case2");
  const auto pairs = generate_pairs(shots, set, {0});
  EXPECT_EQ(pairs.size(), 77u);
  EXPECT_EQ(as_triples(pairs), brute_force(shots, set, {0}));
}

TEST(GeneratePairs, AllIlabPresetsMatchOracle) {
  const auto shots = grid_shots(2, ilab_grid);
  for (const auto &name : {"ilab-case1", "ilab-case3", "ilab-case4"}) {
    const auto set = enumerate_grid_pairs(ilab_grid, name);
    EXPECT_EQ(as_triples(generate_pairs(shots, set, {0, 1})), brute_force(shots, set, {0, 1})) << name;
  }
}

TEST(GeneratePairs, DeskGridSixtyFourInstances) {
  const ViewpointGrid desk{8, 8, false};
  const auto shots = grid_shots(64, desk, 8);
  const auto ids = all_instances(shots);
  for (const auto &name : {"ilab-case2", "desk-3", "desk-6"}) {
    const auto set = enumerate_grid_pairs(desk, name);
    const auto pairs = generate_pairs(shots, set, ids);
    EXPECT_EQ(pairs.size(), brute_force(shots, set, ids).size()) << name;
  }
  EXPECT_EQ(generate_pairs(shots, enumerate_grid_pairs(desk, "ilab-case2"), ids).size(), 64u * 8 * 7);
}

TEST(GeneratePairs, WrapGridMatchesOracle) {
  const ViewpointGrid wrap{5, 6, true};
  const auto shots = grid_shots(3, wrap);
  const auto set = enumerate_grid_pairs(wrap, std::vector<GridRelation>{{0, 1, {}}, {0, -2, {}}, {1, 3, {}}, {2, 0, 1}});
  EXPECT_EQ(as_triples(generate_pairs(shots, set, {0, 1, 2})), brute_force(shots, set, {0, 1, 2}));
}

TEST(GeneratePairs, PairsShareNonViewpointConditions) {
  const ViewpointGrid desk{3, 3, false};
  std::vector<Shot> shots;
  for (int light = 0; light < 2; ++light)
    for (int c = 0; c < 3; ++c)
      for (int r = 0; r < 3; ++r)
        shots.push_back({0, 0, c, r, 0, 0, light, 0, ""});
  const auto set = enumerate_grid_pairs(desk, "desk-3");
  const auto pairs = generate_pairs(shots, set, {0});
  EXPECT_EQ(as_triples(pairs), brute_force(shots, set, {0}));
  for (const auto &p : pairs)
    EXPECT_EQ(shots[p.left].lighting, shots[p.right].lighting);
  EXPECT_EQ(generate_pairs(filter_conditions(shots, 1, 0), set, {0}).size(), pairs.size() / 2);
}

TEST(GeneratePairs, LabelSoundnessAndOrdering) {
  const ViewpointGrid desk{6, 5, false};
  const auto shots = grid_shots(4, desk, 2);
  const auto set = enumerate_grid_pairs(desk, "desk-6");
  const auto pairs = generate_pairs(shots, set, all_instances(shots));
  ASSERT_FALSE(pairs.empty());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto &p = pairs[i];
    EXPECT_EQ(shots[p.left].instance, shots[p.right].instance);
    EXPECT_LT(p.pose_label, set.size());
    std::size_t hits = 0;
    for (const auto &d : set.descriptors)
      hits += oracle_relation(d, &desk, shots[p.left], shots[p.right]) ? 1 : 0;
    EXPECT_EQ(hits, 1u);
    EXPECT_TRUE(oracle_relation(set.descriptors[p.pose_label], &desk, shots[p.left], shots[p.right]));
    EXPECT_EQ(p.category, shots[p.left].category);
    if (i > 0) {
      const auto &q = pairs[i - 1];
      const auto prev = std::tuple{shots[q.left].instance, q.pose_label, shots[q.left].camera, shots[q.left].rotation};
      const auto cur = std::tuple{shots[p.left].instance, p.pose_label, shots[p.left].camera, shots[p.left].rotation};
      EXPECT_LT(prev, cur);
    }
  }
}

TEST(GeneratePairs, TestSplitInstancesGiveEmptyWithWarning) {
  const ViewpointGrid desk{4, 4, false};
  const auto shots = grid_shots(4, desk, 2);
  std::vector<std::string> warnings;
  auto previous = set_warning_sink([&](const std::string &m) { warnings.push_back(m); });
  const auto pairs = generate_pairs(shots, enumerate_grid_pairs(desk, "desk-3"), {17, 18});
  set_warning_sink(previous);
  EXPECT_TRUE(pairs.empty());
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(GeneratePairs, SplitDisjointness) {
  const ViewpointGrid desk{4, 4, false};
  const auto shots = grid_shots(16, desk, 4);
  const auto split = split_instances(shots, 0.75, 3);
  const auto pairs = generate_pairs(shots, enumerate_grid_pairs(desk, "desk-6"), split.train_set());
  const auto test = split.test_set();
  for (const auto &p : pairs) {
    EXPECT_FALSE(test.contains(shots[p.left].instance));
    EXPECT_FALSE(test.contains(shots[p.right].instance));
  }
}

// ---- left-image set

TEST(LeftImageSet, CardinalityOrderAndDuplicates) {
  const ViewpointGrid desk{4, 4, false};
  const auto shots = grid_shots(2, desk, 2);
  const auto pairs = generate_pairs(shots, enumerate_grid_pairs(desk, "desk-6"), {0, 1});
  const auto singles = left_image_set(pairs, shots);
  ASSERT_EQ(singles.size(), pairs.size());
  std::set<std::size_t> distinct;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EXPECT_EQ(singles[i].shot, pairs[i].left);
    EXPECT_EQ(singles[i].category, shots[pairs[i].left].category);
    distinct.insert(singles[i].shot);
  }
  EXPECT_LT(distinct.size(), singles.size());
  EXPECT_TRUE(left_image_set({}, shots).empty());
}

TEST(LeftImageSet, RightImagesAreShuffledLeftImagesOnWrapGrid) {
  const ViewpointGrid wrap{6, 8, true};
  const auto shots = grid_shots(3, wrap);
  const auto set = enumerate_grid_pairs(wrap, std::vector<GridRelation>{{0, 1, {}}, {1, 0, {}}, {-1, 0, {}}, {0, 3, {}}});
  const auto pairs = generate_pairs(shots, set, {0, 1, 2});
  std::multiset<std::size_t> lefts, rights;
  for (const auto &p : pairs) {
    lefts.insert(p.left);
    rights.insert(p.right);
  }
  EXPECT_EQ(lefts, rights);
}

// ---- splits

TEST(SplitInstances, SixTwoPerCategory) {
  const auto shots = grid_shots(64, {2, 2, false}, 8);
  const auto split = split_instances(shots, 0.75, 11);
  std::map<int, int> train, test;
  for (int id : split.train_instances)
    ++train[id % 8];
  for (int id : split.test_instances)
    ++test[id % 8];
  for (int c = 0; c < 8; ++c) {
    EXPECT_EQ(train[c], 6);
    EXPECT_EQ(test[c], 2);
  }
  const auto again = split_instances(shots, 0.75, 11);
  EXPECT_EQ(again.train_instances, split.train_instances);
  EXPECT_EQ(again.test_instances, split.test_instances);
  EXPECT_NE(split_instances(shots, 0.75, 12).train_instances, split.train_instances);
}

TEST(SplitInstances, RandomizedUnionAndDisjointness) {
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    Rng rng = keyed_rng(trial, {1});
    std::vector<Shot> shots;
    int next = 0;
    const int categories = 1 + static_cast<int>(uniform_index(rng, 6));
    for (int c = 0; c < categories; ++c) {
      const int n = 2 + static_cast<int>(uniform_index(rng, 9));
      for (int k = 0; k < n; ++k, ++next)
        shots.push_back({next * 7 + 3, c, 0, 0, 0, 0, 0, 0, ""});
    }
    const double f = 0.05 + 0.95 * uniform01(rng);
    const auto split = split_instances(shots, f, trial);
    std::set<int> train = split.train_set(), test = split.test_set(), all = all_instances(shots);
    std::set<int> both;
    std::set_intersection(train.begin(), train.end(), test.begin(), test.end(), std::inserter(both, both.end()));
    EXPECT_TRUE(both.empty());
    std::set<int> uni = train;
    uni.insert(test.begin(), test.end());
    EXPECT_EQ(uni, all);
    std::map<int, int> test_per_category;
    for (const auto &s : shots)
      test_per_category[s.category] += test.contains(s.instance) ? 1 : 0;
    for (const auto &[c, n] : test_per_category)
      EXPECT_GE(n, 1);
  }
}

TEST(SplitInstances, Rejections) {
  std::vector<Shot> shots{{0, 0, 0, 0, 0, 0, 0, 0, ""}, {1, 0, 0, 0, 0, 0, 0, 0, ""}, {2, 1, 0, 0, 0, 0, 0, 0, ""}};
  EXPECT_THROW(split_instances(shots, 0.75, 1), DataError);
  shots[2].category = 0;
  EXPECT_NO_THROW(split_instances(shots, 0.75, 1));
  EXPECT_THROW(split_instances(shots, 0.0, 1), ConfigError);
  EXPECT_THROW(split_instances(shots, 1.5, 1), ConfigError);
  shots.push_back({0, 1, 0, 0, 0, 0, 0, 0, ""});
  EXPECT_THROW(split_instances(shots, 0.75, 1), DataError);
}

TEST(EpochPermutation, DeterministicPermutation) {
  const auto a = epoch_permutation(100, 5, 0);
  EXPECT_EQ(a, epoch_permutation(100, 5, 0));
  EXPECT_NE(a, epoch_permutation(100, 5, 1));
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i)
    EXPECT_EQ(sorted[i], i);
}

// ---- scaling

TEST(ScalePair, IdentityAndLabelPreservation) {
  Tensor<float> img(Shape{3, 8, 8});
  for (std::size_t i = 0; i < img.size(); ++i)
    img[i] = static_cast<float>(i);
  const ImagePair pair{img, img, PairedExample{1, 2, 5, 3}};
  const auto same = scale_pair(pair, 1.0, 1.0);
  EXPECT_EQ(same.left, img);
  EXPECT_EQ(same.right, img);
  const auto scaled = scale_pair(pair, 2.0, 0.5);
  EXPECT_EQ(scaled.meta, pair.meta);
  EXPECT_EQ(scaled.left.shape(), img.shape());
  EXPECT_EQ(scaled.left, img); // upsample then downsample by nearest is lossless
  EXPECT_NE(scaled.right, img);
  EXPECT_THROW(scale_pair(pair, 0.0, 1.0), ConfigError);
}

TEST(ScalePair, CropThenRescaleKeepsLabel) {
  Tensor<float> img(Shape{1, 16, 16}, 0.5f);
  Tensor<float> crop(Shape{1, 8, 8});
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x)
      crop[y * 8 + x] = img[(y + 4) * 16 + x + 4];
  const auto resized = resize_nearest(crop, 16, 16);
  const ImagePair pair{resized, img, PairedExample{0, 1, 2, std::nullopt}};
  EXPECT_EQ(scale_pair(pair, 1.5, 1.0).meta.pose_label, 2u);
}

// ---- manifests

class ManifestFiles : public ::testing::Test {
protected:
  std::filesystem::path dir = std::filesystem::temp_directory_path() /
                              ("disc_pairgen_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                               "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
  void SetUp() override { std::filesystem::create_directories(dir); }
  void TearDown() override { std::filesystem::remove_all(dir); }
  static std::string slurp(const std::filesystem::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }
};

TEST_F(ManifestFiles, ShotRoundTripAndFieldOrder) {
  auto shots = grid_shots(2, {2, 3, false}, 2);
  shots[3].image = "dir/with \"quote\".ppm";
  shots[4].lighting = 4;
  write_shot_manifest(dir / "shots.jsonl", shots);
  EXPECT_EQ(read_shot_manifest(dir / "shots.jsonl"), shots);
  EXPECT_EQ(shot_to_line(Shot{1, 2, 3, 4, 5, 6, 7, 8, "a.ppm"}),
            R"({"instance":1,"category":2,"camera":3,"rotation":4,"sequence":5,"frame":6,"lighting":7,"focus":8,"image":"a.ppm"})");
}

TEST_F(ManifestFiles, PairManifestIsDeterministic) {
  const ViewpointGrid desk{4, 4, false};
  const auto shots = grid_shots(4, desk, 2);
  auto pairs = generate_pairs(shots, enumerate_grid_pairs(desk, "desk-6"), {0, 1, 2, 3});
  pairs[0].category.reset();
  write_pair_manifest(dir / "a.jsonl", pairs);
  write_pair_manifest(dir / "b.jsonl", generate_pairs(shots, enumerate_grid_pairs(desk, "desk-6"), {0, 1, 2, 3}));
  write_pair_manifest(dir / "c.jsonl", generate_pairs(shots, enumerate_grid_pairs(desk, "desk-6"), {0, 1, 2, 3}));
  EXPECT_EQ(slurp(dir / "b.jsonl"), slurp(dir / "c.jsonl"));
  EXPECT_EQ(read_pair_manifest(dir / "a.jsonl", shots.size()), pairs);
  EXPECT_THROW(read_pair_manifest(dir / "a.jsonl", 3), DataError);
}

TEST_F(ManifestFiles, MalformedLinesNameTheLine) {
  std::ofstream(dir / "bad.jsonl") << shot_to_line(Shot{}) << "\n{\"instance\": 1}\n";
  try {
    read_shot_manifest(dir / "bad.jsonl");
    FAIL();
  } catch (const DataError &e) {
    EXPECT_NE(std::string(e.what()).find("bad.jsonl:2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(read_shot_manifest(dir / "missing.jsonl"), IoError);
}

TEST(RelationsJson, RoundTrip) {
  const auto grid_set = enumerate_grid_pairs(ilab_grid, "ilab-case4");
  const auto back = relations_from_json(relations_to_json(grid_set));
  EXPECT_EQ(back, grid_set.descriptors);
  const auto video = enumerate_video_pairs({{0, 30}, {1, 30}}, {5, 10});
  EXPECT_EQ(relations_from_json(relations_to_json(video)), video.descriptors);
  EXPECT_THROW(relations_from_json(R"([{"cam":1,"rot":0},{"delta":5,"sequence":0}])"), ConfigError);
  EXPECT_THROW(relations_from_json("{"), ConfigError);
}

} // namespace
