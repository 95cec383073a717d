#include "disc/sim/turntable.hpp"

#include <cmath>
#include <exception>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <sstream>

#include "disc/common/image_io.hpp"
#include "disc/errors.hpp"
#include "disc/gradcore/rng.hpp"
#include "disc/pairgen/manifest.hpp"

namespace disc::sim {

namespace {

using Point = std::array<double, 2>;

bool in_polygon(const std::vector<Point> &poly, double x, double y) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const auto [xi, yi] = poly[i];
    const auto [xj, yj] = poly[j];
    if ((yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi)
      inside = !inside;
  }
  return inside;
}

std::vector<Point> regular(int n, double radius, double phase) {
  std::vector<Point> p;
  for (int k = 0; k < n; ++k) {
    const double a = phase + 2.0 * std::numbers::pi * k / n;
    p.push_back({radius * std::cos(a), radius * std::sin(a)});
  }
  return p;
}

// Four points with long vertical and short horizontal arms, so the outline
// repeats only every half turn.
std::vector<Point> star_polygon() {
  std::vector<Point> p;
  for (int k = 0; k < 8; ++k) {
    const double r = k % 2 == 1 ? 0.3 : (k % 4 == 0 ? 0.65 : 1.0);
    const double a = std::numbers::pi * k / 4;
    p.push_back({r * std::cos(a), r * std::sin(a)});
  }
  return p;
}

const std::vector<Point> &polygon(int family) {
  static const std::vector<Point> triangle{{0.0, 1.0}, {-0.9, -0.6}, {0.9, -0.6}};
  static const std::vector<Point> star = star_polygon();
  static const std::vector<Point> hexagon = regular(6, 0.9, 0.0);
  static const std::vector<Point> ell{{-0.7, 0.9}, {-0.3, 0.9}, {-0.3, -0.4}, {0.7, -0.4}, {0.7, -0.9}, {-0.7, -0.9}};
  static const std::vector<Point> tee{{-0.9, 0.9}, {0.9, 0.9}, {0.9, 0.5}, {0.2, 0.5},
                                      {0.2, -0.9}, {-0.2, -0.9}, {-0.2, 0.5}, {-0.9, 0.5}};
  static const std::vector<Point> arrow{{0.95, 0.0}, {0.2, 0.75}, {0.2, 0.3}, {-0.9, 0.3},
                                        {-0.9, -0.3}, {0.2, -0.3}, {0.2, -0.75}};
  static const std::vector<Point> none;
  switch (family) {
  case 0: return triangle;
  case 4: return star;
  case 7: return hexagon;
  case 8: return ell;
  case 9: return tee;
  case 11: return arrow;
  default: return none;
  }
}

// Shape membership in unit object coordinates.
bool inside(int family, double x, double y) {
  switch (family) {
  case 1: return std::abs(x) <= 0.9 && std::abs(y) <= 0.55;
  case 2: return x * x / 0.81 + y * y / 0.36 <= 1.0;
  case 3: return (std::abs(x) <= 0.28 && std::abs(y) <= 0.9) || (std::abs(y) <= 0.28 && std::abs(x) <= 0.9);
  case 5: {
    const double r2 = x * x + y * y;
    return r2 <= 0.81 && r2 >= 0.2;
  }
  case 6: return std::abs(x) / 0.95 + std::abs(y) / 0.7 <= 1.0;
  case 10: return x * x + y * y <= 0.81 && (x - 0.4) * (x - 0.4) + y * y >= 0.5;
  default: return in_polygon(polygon(family), x, y);
  }
}

double degrees(double d) { return d * std::numbers::pi / 180.0; }

} // namespace

std::string_view family_name(int family) {
  static constexpr std::array<std::string_view, kNumFamilies> names{
      "triangle", "rectangle", "ellipse", "cross", "star", "annulus",
      "diamond", "hexagon", "l-shape", "t-shape", "crescent", "arrow"};
  if (family < 0 || family >= kNumFamilies)
    throw ConfigError("shape family " + std::to_string(family) + " out of range");
  return names[static_cast<std::size_t>(family)];
}

void RenderConfig::validate() const {
  grid.validate();
  if (image_size < 8)
    throw ConfigError("image size must be at least 8, got " + std::to_string(image_size));
  if (!(azimuth_arc_degrees > 0) || !(rotation_arc_degrees > 0))
    throw ConfigError("viewpoint arcs must be positive");
  if (azimuth_arc_degrees >= 90.0)
    throw ConfigError("azimuth arc must stay below 90 degrees");
  if (!(noise_std >= 0))
    throw ConfigError("noise std must be non-negative");
}

void DatasetOptions::validate() const {
  if (num_categories < 2)
    throw ConfigError("a dataset needs at least 2 categories");
  if (instances_per_category < 1)
    throw ConfigError("a dataset needs at least 1 instance per category");
  if (first_family < 0 || first_family + num_categories > kNumFamilies)
    throw ConfigError("families " + std::to_string(first_family) + ".." +
                      std::to_string(first_family + num_categories - 1) + " exceed the " +
                      std::to_string(kNumFamilies) + " available shapes");
}

ShapeInstance make_instance(int instance, int category, int family, std::uint64_t seed) {
  family_name(family);
  Rng rng = keyed_rng(seed, {0x696e7374ULL, static_cast<std::uint64_t>(instance)});
  ShapeInstance s;
  s.instance = instance;
  s.category = category;
  s.family = family;
  s.size = 0.6 + 0.15 * uniform01(rng);
  s.aspect = std::exp(std::log(1.15) * (2.0 * uniform01(rng) - 1.0));
  const double intensity = 0.7 + 0.3 * uniform01(rng);
  const std::array<double, 3> tint{0.95, 0.8, 0.55};
  for (std::size_t c = 0; c < 3; ++c)
    s.color[c] = intensity * tint[c];
  s.stripe_frequency = 1.0 + 2.0 * uniform01(rng);
  s.stripe_phase = uniform01(rng);
  return s;
}

Tensor<float> render_shot(const ShapeInstance &shape, int camera, int rotation, const RenderConfig &config) {
  config.validate();
  const auto &grid = config.grid;
  if (camera < 0 || camera >= grid.cameras || rotation < 0 || rotation >= grid.rotations)
    throw std::out_of_range("shot (" + std::to_string(camera) + ", " + std::to_string(rotation) +
                            ") outside the " + std::to_string(grid.cameras) + "x" + std::to_string(grid.rotations) +
                            " grid");
  const double theta = grid.rotations > 1 ? degrees(config.rotation_arc_degrees) * rotation / (grid.rotations - 1) : 0;
  const double phi = grid.cameras > 1 ? degrees(config.azimuth_arc_degrees) * camera / (grid.cameras - 1) : 0;
  // image = A(phi) * R(theta) * object, with A = [[cos phi, 0], [0.8 sin phi, 1]].
  const double a00 = std::cos(phi), a10 = 0.8 * std::sin(phi);
  const double ct = std::cos(theta), st = std::sin(theta);
  const double sx = shape.size * shape.aspect, sy = shape.size / shape.aspect;

  const std::size_t n = config.image_size;
  constexpr int ss = 4;
  Tensor<float> image(Shape{3, n, n});
  Rng noise = keyed_rng(config.seed, {0x6e6f697365ULL, static_cast<std::uint64_t>(shape.instance),
                                      static_cast<std::uint64_t>(camera), static_cast<std::uint64_t>(rotation)});
  for (std::size_t py = 0; py < n; ++py)
    for (std::size_t px = 0; px < n; ++px) {
      double bg = 0.35;
      if (config.background == Background::Noise)
        bg += config.noise_std * standard_normal(noise);
      std::array<double, 3> acc{0, 0, 0};
      for (int sy_i = 0; sy_i < ss; ++sy_i)
        for (int sx_i = 0; sx_i < ss; ++sx_i) {
          // Image coordinates in [-1, 1], y up.
          const double ix = 2.0 * (px + (sx_i + 0.5) / ss) / n - 1.0;
          const double iy = 1.0 - 2.0 * (py + (sy_i + 0.5) / ss) / n;
          // Undo A, then R.
          const double ux = ix / a00;
          const double uy = iy - a10 * ux;
          const double ox = (ct * ux + st * uy) / sx;
          const double oy = (-st * ux + ct * uy) / sy;
          if (inside(shape.family, ox, oy)) {
            const double stripe = std::sin(2.0 * std::numbers::pi * (shape.stripe_frequency * ox + shape.stripe_phase));
            const double shade = 0.65 + 0.1 * stripe + 0.3 * oy;
            for (std::size_t c = 0; c < 3; ++c)
              acc[c] += shape.color[c] * shade;
          } else {
            for (std::size_t c = 0; c < 3; ++c)
              acc[c] += bg;
          }
        }
      for (std::size_t c = 0; c < 3; ++c)
        image[(c * n + py) * n + px] = static_cast<float>(std::clamp(acc[c] / (ss * ss), 0.0, 1.0));
    }
  return image;
}

namespace {

using json = nlohmann::ordered_json;

std::string image_name(const pairs::Shot &s) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "images/i%04d_c%02d_r%02d.ppm", s.instance, s.camera, s.rotation);
  return buf;
}

} // namespace

std::vector<pairs::Shot> generate_dataset(const DatasetOptions &options, const RenderConfig &config,
                                          const std::filesystem::path &out_dir) {
  options.validate();
  config.validate();
  const auto manifest = out_dir / kShotManifest;
  const auto info_path = out_dir / kDatasetInfo;
  if (!options.overwrite && (std::filesystem::exists(manifest) || std::filesystem::exists(info_path) ||
                             std::filesystem::exists(out_dir / "images")))
    throw IoError(out_dir.string() + " already holds a dataset; enable overwrite to replace it");
  std::filesystem::create_directories(out_dir / "images");

  std::vector<ShapeInstance> instances;
  for (int c = 0; c < options.num_categories; ++c)
    for (int k = 0; k < options.instances_per_category; ++k)
      instances.push_back(make_instance(c * options.instances_per_category + k, c, options.first_family + c, config.seed));

  const auto &grid = config.grid;
  std::vector<pairs::Shot> shots;
  for (const auto &inst : instances)
    for (int cam = 0; cam < grid.cameras; ++cam)
      for (int rot = 0; rot < grid.rotations; ++rot) {
        pairs::Shot s{inst.instance, inst.category, cam, rot, 0, 0, 0, 0, ""};
        if (options.video_layout) {
          s.sequence = cam;
          s.frame = rot;
        }
        s.image = image_name(s);
        shots.push_back(s);
      }

  const auto per_instance = static_cast<std::size_t>(grid.cameras * grid.rotations);
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(shots.size()); ++i) {
    const auto &s = shots[static_cast<std::size_t>(i)];
    try {
      write_ppm(out_dir / s.image, render_shot(instances[static_cast<std::size_t>(i) / per_instance], s.camera,
                                               s.rotation, config));
    } catch (...) {
#pragma omp critical
      failure = std::current_exception();
    }
  }
  if (failure)
    std::rethrow_exception(failure);

  pairs::write_shot_manifest(manifest, shots);
  write_dataset_info(info_path, DatasetInfo{options, config, shots.size()});
  return shots;
}

void write_dataset_info(const std::filesystem::path &path, const DatasetInfo &info) {
  json j;
  j["num_categories"] = info.options.num_categories;
  j["instances_per_category"] = info.options.instances_per_category;
  j["first_family"] = info.options.first_family;
  j["video_layout"] = info.options.video_layout;
  j["image_size"] = info.render.image_size;
  j["cameras"] = info.render.grid.cameras;
  j["rotations"] = info.render.grid.rotations;
  j["rotation_wraps"] = info.render.grid.rotation_wraps;
  j["azimuth_arc_degrees"] = info.render.azimuth_arc_degrees;
  j["rotation_arc_degrees"] = info.render.rotation_arc_degrees;
  j["background"] = info.render.background == Background::Noise ? "noise" : "flat";
  j["noise_std"] = info.render.noise_std;
  j["seed"] = info.render.seed;
  j["num_shots"] = info.num_shots;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

DatasetInfo read_dataset_info(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    const json j = json::parse(buf.str());
    DatasetInfo info;
    info.options.num_categories = j.at("num_categories").get<int>();
    info.options.instances_per_category = j.at("instances_per_category").get<int>();
    info.options.first_family = j.at("first_family").get<int>();
    info.options.video_layout = j.at("video_layout").get<bool>();
    info.render.image_size = j.at("image_size").get<std::size_t>();
    info.render.grid = {j.at("cameras").get<int>(), j.at("rotations").get<int>(), j.at("rotation_wraps").get<bool>()};
    info.render.azimuth_arc_degrees = j.at("azimuth_arc_degrees").get<double>();
    info.render.rotation_arc_degrees = j.at("rotation_arc_degrees").get<double>();
    info.render.background = j.at("background").get<std::string>() == "flat" ? Background::Flat : Background::Noise;
    info.render.noise_std = j.at("noise_std").get<double>();
    info.render.seed = j.at("seed").get<std::uint64_t>();
    info.num_shots = j.at("num_shots").get<std::size_t>();
    return info;
  } catch (const json::exception &e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

LoadedDataset load_dataset(const std::filesystem::path &dir) {
  LoadedDataset data;
  data.info = read_dataset_info(dir / kDatasetInfo);
  data.shots = pairs::read_shot_manifest(dir / kShotManifest);
  if (data.shots.size() != data.info.num_shots)
    throw DataError(dir.string() + ": manifest has " + std::to_string(data.shots.size()) + " shots, dataset.json says " +
                    std::to_string(data.info.num_shots));
  data.images.resize(data.shots.size(), Tensor<float>(Shape{1}));
  const Shape expected{3, data.info.render.image_size, data.info.render.image_size};
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(data.shots.size()); ++i) {
    try {
      auto img = read_pnm(dir / data.shots[static_cast<std::size_t>(i)].image);
      if (img.shape() != expected)
        throw DataError(data.shots[static_cast<std::size_t>(i)].image + ": expected " + to_string(expected) +
                        ", found " + to_string(img.shape()));
      data.images[static_cast<std::size_t>(i)] = std::move(img);
    } catch (...) {
#pragma omp critical
      failure = std::current_exception();
    }
  }
  if (failure)
    std::rethrow_exception(failure);
  return data;
}

} // namespace disc::sim
