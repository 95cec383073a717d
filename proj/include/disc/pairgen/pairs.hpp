#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace disc::pairs {

struct Shot {
  int instance = 0;
  int category = 0;
  int camera = 0;
  int rotation = 0;
  int sequence = 0;
  int frame = 0;
  int lighting = 0;
  int focus = 0;
  std::string image;

  friend bool operator==(const Shot &, const Shot &) = default;
};

struct ViewpointGrid {
  int cameras = 1;
  int rotations = 1;
  bool rotation_wraps = false;

  void validate() const;
  friend bool operator==(const ViewpointGrid &, const ViewpointGrid &) = default;
};

/// Left shot at (c, r) pairs with right shot at (c + cam_offset, r + rot_offset).
/// An anchored relation only applies when the left camera equals the anchor.
struct GridRelation {
  int cam_offset = 0;
  int rot_offset = 0;
  std::optional<int> anchor_camera;

  friend bool operator==(const GridRelation &, const GridRelation &) = default;
};

/// Right frame = left frame + delta, both within `sequence`.
struct VideoRelation {
  int delta = 0;
  int sequence = 0;

  friend bool operator==(const VideoRelation &, const VideoRelation &) = default;
};

using PairDescriptor = std::variant<GridRelation, VideoRelation>;

/// Ordered descriptor list; a pair's pose label is the position of the one
/// descriptor it satisfies.
struct CameraPairSet {
  std::vector<PairDescriptor> descriptors;
  std::optional<ViewpointGrid> grid; // set for grid-type sets

  std::size_t size() const { return descriptors.size(); }
  bool is_video() const;
  /// Labels of every descriptor that the ordered pair (left, right) satisfies.
  std::vector<std::size_t> matches(const Shot &left, const Shot &right) const;

  friend bool operator==(const CameraPairSet &, const CameraPairSet &) = default;
};

struct VideoSequence {
  int id = 0;
  int frames = 0;
};

/// Validates a custom relation list against the grid and returns it verbatim
/// as the label space. Throws ConfigError for duplicates, relations with no
/// valid pair on the grid, and relations that overlap on some pair.
CameraPairSet enumerate_grid_pairs(const ViewpointGrid &grid, std::vector<GridRelation> relations);

/// Named presets: ilab-case1 .. ilab-case4, desk-3, desk-6.
CameraPairSet enumerate_grid_pairs(const ViewpointGrid &grid, const std::string &preset);
std::vector<GridRelation> preset_relations(const ViewpointGrid &grid, const std::string &preset);
std::vector<std::string> grid_preset_names();

/// One label per (delta, sequence), delta-major.
CameraPairSet enumerate_video_pairs(const std::vector<VideoSequence> &sequences, const std::vector<int> &deltas);

struct PairedExample {
  std::size_t left = 0; // index into the shot list
  std::size_t right = 0;
  std::size_t pose_label = 0;
  std::optional<int> category;

  friend bool operator==(const PairedExample &, const PairedExample &) = default;
};

struct PairOptions {
  /// Keep only shots with frame % subsample_every == 0 (video data). Deltas are
  /// still measured in original frame numbers.
  int subsample_every = 1;
};

/// Every ordered pair of shots from allowed instances that satisfies exactly
/// one descriptor and agrees on all non-viewpoint metadata. Sorted by
/// instance, label, then left and right viewpoint coordinates. An empty result
/// is reported through warn().
std::vector<PairedExample> generate_pairs(const std::vector<Shot> &shots, const CameraPairSet &set,
                                          const std::set<int> &instances, const PairOptions &options = {});

std::vector<Shot> filter_conditions(const std::vector<Shot> &shots, int lighting, int focus);

struct SingleExample {
  std::size_t shot = 0;
  int category = 0;

  friend bool operator==(const SingleExample &, const SingleExample &) = default;
};

/// Left image of every pair, duplicates kept, in pair order.
std::vector<SingleExample> left_image_set(const std::vector<PairedExample> &pairs, const std::vector<Shot> &shots);

struct SplitSpec {
  std::vector<int> train_instances;
  std::vector<int> test_instances;
  std::uint64_t seed = 0;
  double train_fraction = 0.75;

  std::set<int> train_set() const { return {train_instances.begin(), train_instances.end()}; }
  std::set<int> test_set() const { return {test_instances.begin(), test_instances.end()}; }
};

/// Per category: seeded shuffle, floor(f * n) to train but at least one test
/// instance. Throws DataError for a category with a single instance or an
/// instance listed under two categories.
SplitSpec split_instances(const std::vector<Shot> &shots, double train_fraction, std::uint64_t seed);

/// Shared per-epoch order over n examples.
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::size_t epoch);

} // namespace disc::pairs
