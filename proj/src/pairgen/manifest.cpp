#include "disc/pairgen/manifest.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "disc/errors.hpp"

namespace disc::pairs {

using json = nlohmann::ordered_json;

namespace {

std::ofstream open_out(const std::filesystem::path &path) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot read " + path.string());
  return in;
}

int get_int(const json &j, const char *key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number_integer())
    throw DataError(std::string("missing or non-integer field '") + key + "'");
  return it->get<int>();
}

json parse_object(const std::string &text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error &e) {
    throw DataError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object())
    throw DataError("expected a JSON object");
  return j;
}

template <typename F> void for_each_line(const std::filesystem::path &path, F &&f) {
  auto in = open_in(path);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty())
      continue;
    try {
      f(line);
    } catch (const DataError &e) {
      throw DataError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

json relation_to_json(const PairDescriptor &d) {
  json j;
  if (const auto *g = std::get_if<GridRelation>(&d)) {
    j["cam"] = g->cam_offset;
    j["rot"] = g->rot_offset;
    if (g->anchor_camera)
      j["anchor"] = *g->anchor_camera;
  } else {
    const auto &v = std::get<VideoRelation>(d);
    j["delta"] = v.delta;
    j["sequence"] = v.sequence;
  }
  return j;
}

std::vector<PairDescriptor> relations_from(const json &arr) {
  if (!arr.is_array())
    throw ConfigError("relation list must be a JSON array");
  std::vector<PairDescriptor> out;
  try {
    for (const auto &j : arr) {
      if (!j.is_object())
        throw ConfigError("relation entries must be objects");
      if (j.contains("delta")) {
        out.emplace_back(VideoRelation{get_int(j, "delta"), get_int(j, "sequence")});
      } else {
        GridRelation g{get_int(j, "cam"), get_int(j, "rot"), std::nullopt};
        if (j.contains("anchor"))
          g.anchor_camera = get_int(j, "anchor");
        out.emplace_back(g);
      }
    }
  } catch (const DataError &e) {
    throw ConfigError(std::string("relation list: ") + e.what());
  }
  const bool video = !out.empty() && std::holds_alternative<VideoRelation>(out.front());
  for (const auto &d : out)
    if (std::holds_alternative<VideoRelation>(d) != video)
      throw ConfigError("relation list mixes grid and video relations");
  return out;
}

} // namespace

std::string shot_to_line(const Shot &s) {
  json j;
  j["instance"] = s.instance;
  j["category"] = s.category;
  j["camera"] = s.camera;
  j["rotation"] = s.rotation;
  j["sequence"] = s.sequence;
  j["frame"] = s.frame;
  j["lighting"] = s.lighting;
  j["focus"] = s.focus;
  j["image"] = s.image;
  return j.dump();
}

Shot shot_from_line(const std::string &line) {
  const json j = parse_object(line);
  Shot s;
  s.instance = get_int(j, "instance");
  s.category = get_int(j, "category");
  s.camera = get_int(j, "camera");
  s.rotation = get_int(j, "rotation");
  s.sequence = get_int(j, "sequence");
  s.frame = get_int(j, "frame");
  s.lighting = get_int(j, "lighting");
  s.focus = get_int(j, "focus");
  const auto it = j.find("image");
  if (it == j.end() || !it->is_string())
    throw DataError("missing or non-string field 'image'");
  s.image = it->get<std::string>();
  return s;
}

void write_shot_manifest(const std::filesystem::path &path, const std::vector<Shot> &shots) {
  auto out = open_out(path);
  for (const auto &s : shots)
    out << shot_to_line(s) << '\n';
  if (!out)
    throw IoError("failed writing " + path.string());
}

std::vector<Shot> read_shot_manifest(const std::filesystem::path &path) {
  std::vector<Shot> shots;
  for_each_line(path, [&](const std::string &line) { shots.push_back(shot_from_line(line)); });
  return shots;
}

void write_pair_manifest(const std::filesystem::path &path, const std::vector<PairedExample> &pairs) {
  auto out = open_out(path);
  for (const auto &p : pairs) {
    json j;
    j["left"] = p.left;
    j["right"] = p.right;
    j["pose"] = p.pose_label;
    j["category"] = p.category ? json(*p.category) : json(nullptr);
    out << j.dump() << '\n';
  }
  if (!out)
    throw IoError("failed writing " + path.string());
}

std::vector<PairedExample> read_pair_manifest(const std::filesystem::path &path, std::size_t num_shots) {
  std::vector<PairedExample> pairs;
  for_each_line(path, [&](const std::string &line) {
    const json j = parse_object(line);
    PairedExample p;
    const int left = get_int(j, "left"), right = get_int(j, "right"), pose = get_int(j, "pose");
    if (left < 0 || right < 0 || pose < 0)
      throw DataError("negative index");
    p.left = static_cast<std::size_t>(left);
    p.right = static_cast<std::size_t>(right);
    p.pose_label = static_cast<std::size_t>(pose);
    if (p.left >= num_shots || p.right >= num_shots)
      throw DataError("shot index out of range (manifest has " + std::to_string(num_shots) + " shots)");
    if (j.contains("category") && !j["category"].is_null())
      p.category = get_int(j, "category");
    pairs.push_back(p);
  });
  return pairs;
}

std::string relations_to_json(const CameraPairSet &set) {
  json arr = json::array();
  for (const auto &d : set.descriptors)
    arr.push_back(relation_to_json(d));
  return arr.dump();
}

std::vector<PairDescriptor> relations_from_json(const std::string &text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error &e) {
    throw ConfigError(std::string("malformed relation JSON: ") + e.what());
  }
  return relations_from(j);
}

PresetFixture read_preset_fixture(const std::filesystem::path &path) {
  auto in = open_in(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  json j;
  try {
    j = json::parse(buffer.str());
  } catch (const json::parse_error &e) {
    throw DataError(path.string() + ": " + e.what());
  }
  PresetFixture fixture;
  const auto &g = j.at("grid");
  fixture.grid = {g.at("cameras").get<int>(), g.at("rotations").get<int>(), g.at("wraps").get<bool>()};
  for (const auto &[name, list] : j.at("presets").items()) {
    std::vector<GridRelation> rels;
    for (const auto &d : relations_from(list))
      rels.push_back(std::get<GridRelation>(d));
    fixture.presets.emplace_back(name, std::move(rels));
  }
  return fixture;
}

} // namespace disc::pairs
