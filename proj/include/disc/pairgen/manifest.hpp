#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "disc/pairgen/pairs.hpp"

namespace disc::pairs {

/// One JSON object per line, keys in the order: instance, category, camera,
/// rotation, sequence, frame, lighting, focus, image.
std::string shot_to_line(const Shot &shot);
Shot shot_from_line(const std::string &line);
void write_shot_manifest(const std::filesystem::path &path, const std::vector<Shot> &shots);
std::vector<Shot> read_shot_manifest(const std::filesystem::path &path);

/// One object per line: {"left", "right", "pose", "category"} with shots
/// referenced by 0-based manifest line index.
void write_pair_manifest(const std::filesystem::path &path, const std::vector<PairedExample> &pairs);
std::vector<PairedExample> read_pair_manifest(const std::filesystem::path &path, std::size_t num_shots);

/// Relation lists as JSON: [{"cam": 2, "rot": 0, "anchor": 0}, ...] or
/// [{"delta": 5, "sequence": 0}, ...].
std::string relations_to_json(const CameraPairSet &set);
std::vector<PairDescriptor> relations_from_json(const std::string &text);

/// Reads the frozen preset fixture ({"grid": {...}, "presets": {name: [...]}}).
struct PresetFixture {
  ViewpointGrid grid;
  std::vector<std::pair<std::string, std::vector<GridRelation>>> presets;
};
PresetFixture read_preset_fixture(const std::filesystem::path &path);

} // namespace disc::pairs
