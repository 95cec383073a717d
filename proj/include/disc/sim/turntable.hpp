#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "disc/gradcore/tensor.hpp"
#include "disc/pairgen/pairs.hpp"

namespace disc::sim {

inline constexpr int kNumFamilies = 12;

/// triangle, rectangle, ellipse, cross, star, annulus, diamond, hexagon,
/// l-shape, t-shape, crescent, arrow.
std::string_view family_name(int family);

enum class Background { Flat, Noise };

struct RenderConfig {
  std::size_t image_size = 32;
  pairs::ViewpointGrid grid{8, 8, false};
  double azimuth_arc_degrees = 60.0;
  double rotation_arc_degrees = 157.5;
  Background background = Background::Noise;
  double noise_std = 0.02;
  std::uint64_t seed = 1;

  void validate() const;
};

struct ShapeInstance {
  int instance = 0;
  int category = 0;
  int family = 0;
  double size = 0.7;   // half-extent as a fraction of the half image
  double aspect = 1.0; // x stretch; y gets 1 / aspect
  std::array<double, 3> color{1.0, 1.0, 1.0};
  double stripe_frequency = 2.0;
  double stripe_phase = 0.0;
};

/// Instance parameters are a function of (seed, instance) only.
ShapeInstance make_instance(int instance, int category, int family, std::uint64_t seed);

/// 3 x H x W image in [0, 1]. Rotation index r turns the shape in-plane by
/// r * rotation_arc / (R - 1); camera index c foreshortens and shears by the
/// angle c * azimuth_arc / (C - 1). Background noise is keyed by the shot.
Tensor<float> render_shot(const ShapeInstance &shape, int camera, int rotation, const RenderConfig &config);

struct DatasetOptions {
  int num_categories = 8;
  int instances_per_category = 8;
  int first_family = 0; // categories use families first_family .. first_family + n - 1
  /// Also record camera as the sequence and rotation as the frame, so video
  /// gap pairs can be built from a turntable set.
  bool video_layout = false;
  bool overwrite = false;

  void validate() const;
};

/// Everything needed to rebuild a dataset, stored next to the manifest.
struct DatasetInfo {
  DatasetOptions options;
  RenderConfig render;
  std::size_t num_shots = 0;
};

inline constexpr const char *kShotManifest = "shots.jsonl";
inline constexpr const char *kDatasetInfo = "dataset.json";

/// Writes images/<...>.ppm, shots.jsonl and dataset.json under out_dir and
/// returns the shots in manifest order. Throws IoError if outputs exist and
/// overwrite is off.
std::vector<pairs::Shot> generate_dataset(const DatasetOptions &options, const RenderConfig &config,
                                          const std::filesystem::path &out_dir);

void write_dataset_info(const std::filesystem::path &path, const DatasetInfo &info);
DatasetInfo read_dataset_info(const std::filesystem::path &path);

/// A dataset loaded into memory: shots plus decoded images, index-aligned.
struct LoadedDataset {
  DatasetInfo info;
  std::vector<pairs::Shot> shots;
  std::vector<Tensor<float>> images;
};

LoadedDataset load_dataset(const std::filesystem::path &dir);

} // namespace disc::sim
