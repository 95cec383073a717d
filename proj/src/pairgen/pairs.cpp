#include "disc/pairgen/pairs.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include "disc/common/log.hpp"
#include "disc/errors.hpp"
#include "disc/gradcore/rng.hpp"

namespace disc::pairs {

void ViewpointGrid::validate() const {
  if (cameras < 1 || rotations < 1)
    throw ConfigError("viewpoint grid needs at least one camera and one rotation, got " + std::to_string(cameras) +
                      "x" + std::to_string(rotations));
}

namespace {

std::string describe(const GridRelation &r) {
  std::string s = "(cam " + std::to_string(r.cam_offset) + ", rot " + std::to_string(r.rot_offset);
  if (r.anchor_camera)
    s += ", anchor " + std::to_string(*r.anchor_camera);
  return s + ")";
}

std::optional<std::pair<int, int>> grid_target(const GridRelation &rel, const ViewpointGrid &grid, int camera,
                                               int rotation) {
  if (rel.anchor_camera && *rel.anchor_camera != camera)
    return std::nullopt;
  const int c = camera + rel.cam_offset;
  if (c < 0 || c >= grid.cameras)
    return std::nullopt;
  int r = rotation + rel.rot_offset;
  if (grid.rotation_wraps) {
    r %= grid.rotations;
    if (r < 0)
      r += grid.rotations;
  } else if (r < 0 || r >= grid.rotations) {
    return std::nullopt;
  }
  return std::pair{c, r};
}

bool same_conditions(const Shot &a, const Shot &b) {
  return a.instance == b.instance && a.lighting == b.lighting && a.focus == b.focus;
}

bool satisfies(const PairDescriptor &d, const std::optional<ViewpointGrid> &grid, const Shot &left, const Shot &right) {
  if (!same_conditions(left, right))
    return false;
  if (const auto *g = std::get_if<GridRelation>(&d)) {
    if (!grid || left.sequence != right.sequence || left.frame != right.frame)
      return false;
    const auto t = grid_target(*g, *grid, left.camera, left.rotation);
    return t && t->first == right.camera && t->second == right.rotation;
  }
  const auto &v = std::get<VideoRelation>(d);
  return left.camera == right.camera && left.sequence == v.sequence && right.sequence == v.sequence &&
         right.frame - left.frame == v.delta;
}

} // namespace

bool CameraPairSet::is_video() const {
  return !descriptors.empty() && std::holds_alternative<VideoRelation>(descriptors.front());
}

std::vector<std::size_t> CameraPairSet::matches(const Shot &left, const Shot &right) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < descriptors.size(); ++i)
    if (satisfies(descriptors[i], grid, left, right))
      out.push_back(i);
  return out;
}

CameraPairSet enumerate_grid_pairs(const ViewpointGrid &grid, std::vector<GridRelation> relations) {
  grid.validate();
  if (relations.empty())
    throw ConfigError("camera pair set is empty");
  for (std::size_t i = 0; i < relations.size(); ++i) {
    const auto &rel = relations[i];
    for (std::size_t j = 0; j < i; ++j)
      if (relations[j] == rel)
        throw ConfigError("duplicate camera relation " + describe(rel));
    bool identity = rel.cam_offset == 0 && rel.rot_offset == 0;
    if (grid.rotation_wraps && rel.cam_offset == 0 && rel.rot_offset % grid.rotations == 0)
      identity = true;
    if (identity)
      throw ConfigError("camera relation " + describe(rel) + " pairs a view with itself");
    bool fits = false;
    for (int c = 0; c < grid.cameras && !fits; ++c)
      for (int r = 0; r < grid.rotations && !fits; ++r)
        fits = grid_target(rel, grid, c, r).has_value();
    if (!fits)
      throw ConfigError("camera relation " + describe(rel) + " has no valid pair on a " +
                        std::to_string(grid.cameras) + "x" + std::to_string(grid.rotations) + " grid");
  }
  for (int c = 0; c < grid.cameras; ++c)
    for (int r = 0; r < grid.rotations; ++r) {
      std::map<std::pair<int, int>, std::size_t> seen;
      for (std::size_t i = 0; i < relations.size(); ++i) {
        const auto t = grid_target(relations[i], grid, c, r);
        if (!t)
          continue;
        auto [it, inserted] = seen.emplace(*t, i);
        if (!inserted)
          throw ConfigError("camera relations " + describe(relations[it->second]) + " and " + describe(relations[i]) +
                            " both pair (" + std::to_string(c) + ", " + std::to_string(r) + ") with (" +
                            std::to_string(t->first) + ", " + std::to_string(t->second) + ")");
      }
    }
  CameraPairSet set;
  set.grid = grid;
  for (auto &rel : relations)
    set.descriptors.emplace_back(rel);
  return set;
}

std::vector<std::string> grid_preset_names() {
  return {"ilab-case1", "ilab-case2", "ilab-case3", "ilab-case4", "desk-3", "desk-6"};
}

std::vector<GridRelation> preset_relations(const ViewpointGrid &grid, const std::string &preset) {
  grid.validate();
  std::vector<GridRelation> case1, case2, out;
  // Skip-one camera pairs; the published label count is 7, so at most the
  // first seven anchors are used.
  for (int i = 0; i + 2 < grid.cameras && i < 7; ++i)
    case1.push_back({2, 0, i});
  for (int i = 0; i < grid.cameras && grid.rotations > 1; ++i)
    case2.push_back({0, 1, i});

  if (preset == "ilab-case1") {
    out = case1;
  } else if (preset == "ilab-case2") {
    out = case2;
  } else if (preset == "ilab-case3" || preset == "ilab-case4") {
    out = case1;
    out.insert(out.end(), case2.begin(), case2.end());
    if (preset == "ilab-case4" && grid.rotations > 1) {
      for (int step : {1, 2})
        for (int i = 0; i + step < grid.cameras; ++i)
          for (int rot : {1, -1})
            out.push_back({step, rot, i});
    }
  } else if (preset == "desk-3") {
    out = {{0, 1, {}}, {1, 0, {}}, {1, 1, {}}};
  } else if (preset == "desk-6") {
    out = {{0, 1, {}}, {1, 0, {}}, {1, 1, {}}, {1, -1, {}}, {2, 0, {}}, {0, 2, {}}};
  } else {
    throw ConfigError("unknown camera pair preset '" + preset + "'");
  }
  if (out.empty())
    throw ConfigError("preset '" + preset + "' is empty on a " + std::to_string(grid.cameras) + "x" +
                      std::to_string(grid.rotations) + " grid");
  return out;
}

CameraPairSet enumerate_grid_pairs(const ViewpointGrid &grid, const std::string &preset) {
  return enumerate_grid_pairs(grid, preset_relations(grid, preset));
}

CameraPairSet enumerate_video_pairs(const std::vector<VideoSequence> &sequences, const std::vector<int> &deltas) {
  if (sequences.empty())
    throw ConfigError("video pair set needs at least one sequence");
  if (deltas.empty())
    throw ConfigError("video pair set needs at least one delta");
  int longest = 0;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    longest = std::max(longest, sequences[i].frames);
    for (std::size_t j = 0; j < i; ++j)
      if (sequences[j].id == sequences[i].id)
        throw ConfigError("duplicate sequence id " + std::to_string(sequences[i].id));
  }
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (deltas[i] <= 0)
      throw ConfigError("frame gap must be positive, got " + std::to_string(deltas[i]));
    if (deltas[i] >= longest)
      throw ConfigError("frame gap " + std::to_string(deltas[i]) + " exceeds every sequence (longest has " +
                        std::to_string(longest) + " frames)");
    for (std::size_t j = 0; j < i; ++j)
      if (deltas[j] == deltas[i])
        throw ConfigError("duplicate frame gap " + std::to_string(deltas[i]));
  }
  CameraPairSet set;
  for (int d : deltas)
    for (const auto &s : sequences)
      set.descriptors.emplace_back(VideoRelation{d, s.id});
  return set;
}

std::vector<PairedExample> generate_pairs(const std::vector<Shot> &shots, const CameraPairSet &set,
                                          const std::set<int> &instances, const PairOptions &options) {
  if (options.subsample_every < 1)
    throw ConfigError("subsample_every must be at least 1");
  if (set.size() == 0)
    throw ConfigError("camera pair set is empty");
  if (!set.is_video() && !set.grid)
    throw ConfigError("grid camera pair set has no grid");

  // Lookup key: every field a partner must agree on or that the relation fixes.
  using Key = std::tuple<int, int, int, int, int, int, int>;
  auto grid_key = [](const Shot &s, int camera, int rotation) {
    return Key{s.instance, camera, rotation, s.sequence, s.frame, s.lighting, s.focus};
  };
  auto video_key = [](const Shot &s, int sequence, int frame) {
    return Key{s.instance, s.camera, sequence, frame, s.lighting, s.focus, 0};
  };
  const bool video = set.is_video();

  std::vector<std::size_t> kept;
  std::multimap<Key, std::size_t> index;
  for (std::size_t i = 0; i < shots.size(); ++i) {
    const auto &s = shots[i];
    if (!instances.contains(s.instance) || s.frame % options.subsample_every != 0)
      continue;
    kept.push_back(i);
    index.emplace(video ? video_key(s, s.sequence, s.frame) : grid_key(s, s.camera, s.rotation), i);
  }

  std::vector<PairedExample> out;
  for (auto li : kept) {
    const Shot &left = shots[li];
    for (std::size_t label = 0; label < set.size(); ++label) {
      const auto &d = set.descriptors[label];
      Key key;
      if (const auto *g = std::get_if<GridRelation>(&d)) {
        const auto t = grid_target(*g, *set.grid, left.camera, left.rotation);
        if (!t)
          continue;
        key = grid_key(left, t->first, t->second);
      } else {
        const auto &v = std::get<VideoRelation>(d);
        if (left.sequence != v.sequence)
          continue;
        key = video_key(left, v.sequence, left.frame + v.delta);
      }
      auto [lo, hi] = index.equal_range(key);
      for (auto it = lo; it != hi; ++it) {
        const Shot &right = shots[it->second];
        if (right.category != left.category)
          throw DataError("instance " + std::to_string(left.instance) + " appears under two categories");
        if (set.matches(left, right).size() != 1)
          throw std::logic_error("pair matches more than one camera relation");
        out.push_back({li, it->second, label, left.category});
      }
    }
  }

  auto coords = [&](std::size_t i) {
    const Shot &s = shots[i];
    return std::tuple{s.camera, s.rotation, s.sequence, s.frame, s.lighting, s.focus};
  };
  std::sort(out.begin(), out.end(), [&](const PairedExample &a, const PairedExample &b) {
    return std::tuple{shots[a.left].instance, a.pose_label, coords(a.left), coords(a.right), a.left, a.right} <
           std::tuple{shots[b.left].instance, b.pose_label, coords(b.left), coords(b.right), b.left, b.right};
  });
  if (out.empty())
    warn("pair generation produced no pairs (" + std::to_string(kept.size()) + " eligible shots, " +
         std::to_string(set.size()) + " relations)");
  return out;
}

std::vector<Shot> filter_conditions(const std::vector<Shot> &shots, int lighting, int focus) {
  std::vector<Shot> out;
  std::copy_if(shots.begin(), shots.end(), std::back_inserter(out),
               [&](const Shot &s) { return s.lighting == lighting && s.focus == focus; });
  return out;
}

std::vector<SingleExample> left_image_set(const std::vector<PairedExample> &pairs, const std::vector<Shot> &shots) {
  std::vector<SingleExample> out;
  out.reserve(pairs.size());
  for (const auto &p : pairs) {
    if (p.left >= shots.size())
      throw DataError("pair references shot " + std::to_string(p.left) + " of " + std::to_string(shots.size()));
    out.push_back({p.left, p.category.value_or(shots[p.left].category)});
  }
  return out;
}

SplitSpec split_instances(const std::vector<Shot> &shots, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0))
    throw ConfigError("train fraction must be in (0, 1], got " + std::to_string(train_fraction));
  std::map<int, int> category_of;
  for (const auto &s : shots) {
    auto [it, inserted] = category_of.emplace(s.instance, s.category);
    if (!inserted && it->second != s.category)
      throw DataError("instance " + std::to_string(s.instance) + " appears under categories " +
                      std::to_string(it->second) + " and " + std::to_string(s.category));
  }
  std::map<int, std::vector<int>> by_category;
  for (const auto &[instance, category] : category_of)
    by_category[category].push_back(instance);

  SplitSpec split;
  split.seed = seed;
  split.train_fraction = train_fraction;
  for (auto &[category, ids] : by_category) {
    if (ids.size() < 2)
      throw DataError("category " + std::to_string(category) + " has a single instance; cannot split");
    Rng rng = keyed_rng(seed, {0x73706c6974ULL, static_cast<std::uint64_t>(category)});
    shuffle_in_place(ids, rng);
    const auto n = ids.size();
    const auto n_train =
        std::min(static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 1e-9)), n - 1);
    split.train_instances.insert(split.train_instances.end(), ids.begin(), ids.begin() + n_train);
    split.test_instances.insert(split.test_instances.end(), ids.begin() + n_train, ids.end());
  }
  std::sort(split.train_instances.begin(), split.train_instances.end());
  std::sort(split.test_instances.begin(), split.test_instances.end());
  return split;
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = keyed_rng(seed, {0x65706f6368ULL, epoch});
  shuffle_in_place(order, rng);
  return order;
}

} // namespace disc::pairs
