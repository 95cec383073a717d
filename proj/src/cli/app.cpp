#include "disc/cli/app.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "disc/disnet/check.hpp"
#include "disc/errors.hpp"
#include "disc/harness/train.hpp"
#include "disc/pairgen/manifest.hpp"
#include "disc/probe/probe.hpp"
#include "disc/sim/turntable.hpp"

namespace disc::cli {

namespace {

constexpr double kGradCheckTolerance = 1e-4;

const std::vector<std::string> kDataCommands{"pairs", "train", "finetune", "eval", "ablate-fc7"};
const std::vector<std::string> kPairCommands{"pairs", "train", "gradcheck", "ablate-fc7"};
const std::vector<std::string> kModelCommands{"train", "gradcheck", "ablate-fc7"};
const std::vector<std::string> kTrainCommands{"train", "finetune", "ablate-fc7"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string> &b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

} // namespace

const std::vector<std::string> &command_names() {
  static const std::vector<std::string> names{"gen", "pairs", "train", "finetune", "eval", "gradcheck", "ablate-fc7"};
  return names;
}

const std::vector<OptionSpec> &option_table() {
  static const std::vector<OptionSpec> table{
      {"dataset", "dir", "dataset", "Dataset directory (written by gen, read by the other commands)",
       "@root/dataset", false, with({"gen"}, kDataCommands)},
      {"dataset", "categories", "categories", "Object categories to generate", "8", false, {"gen", "gradcheck"}},
      {"dataset", "instances", "instances", "Instances per category", "8", false, {"gen"}},
      {"dataset", "first_family", "first-family", "Shape family of the first category (0-11)", "0", false, {"gen"}},
      {"dataset", "cameras", "cameras", "Cameras on the viewpoint grid", "8", false, {"gen", "gradcheck"}},
      {"dataset", "rotations", "rotations", "Turntable positions on the viewpoint grid", "8", false, {"gen", "gradcheck"}},
      {"dataset", "image_size", "image-size", "Rendered image side in pixels", "32", false, {"gen"}},
      {"dataset", "azimuth", "azimuth", "Camera arc in degrees", "60", false, {"gen"}},
      {"dataset", "rotation_arc", "rotation-arc", "Turntable arc in degrees", "157.5", false, {"gen"}},
      {"dataset", "noise", "noise", "Background noise standard deviation", "0.02", false, {"gen"}},
      {"dataset", "seed", "data-seed", "Generator seed", "1", false, {"gen"}},
      {"dataset", "video_layout", "video-layout", "Also index shots as video sequences, one per camera", "false",
       true, {"gen"}},
      {"dataset", "overwrite", "overwrite", "Replace existing dataset files", "false", true, {"gen"}},
      {"dataset", "split", "split-fraction", "Fraction of each category's instances used for training", "0.75",
       false, kDataCommands},
      {"dataset", "split_seed", "split-seed", "Seed of the instance split", "1", false, kDataCommands},

      {"pairs", "preset", "preset", "Camera-pair preset: a grid preset name or video:<d1>,<d2>,...", "desk-6", false,
       kPairCommands},
      {"pairs", "relations", "relations", "JSON file of custom relations; replaces the preset", "", false,
       kPairCommands},
      {"pairs", "subsample", "subsample", "Keep only frames whose index is a multiple of this", "1", false,
       {"pairs", "train", "ablate-fc7"}},
      {"pairs", "grid", "grid", "Viewpoint grid CxR to enumerate without a dataset", "", false, {"pairs"}},
      {"pairs", "split", "pair-split", "Instances to pair: train, test or all", "train", false, {"pairs"}},
      {"pairs", "report", "report", "Print the label-space size and pairs per label", "false", true, {"pairs"}},

      {"model", "preset", "model-preset", "Network preset: desk or paper", "desk", false, kModelCommands},
      {"model", "baseline", "baseline", "Use the single-stream baseline trained on the left-image set", "false", true,
       kModelCommands},
      {"model", "layers", "layers", "Layer string replacing the preset's, e.g. C16k5p2-P2-F128-D", "preset", false,
       kModelCommands},
      {"model", "fc7", "fc7", "Units in the final embedding layer", "preset", false, kModelCommands},
      {"model", "init_std", "init-std", "Gaussian initialization std; 0 selects fan-in scaling", "preset", false,
       kModelCommands},
      {"model", "dropout", "dropout", "Dropout rate", "preset", false, kModelCommands},
      {"model", "tie_loss", "tie-loss", "Tie loss form: norm or squared", "norm", false, kModelCommands},
      {"model", "category_stream", "category-stream", "Stream feeding the category head: left or right", "left",
       false, kModelCommands},

      {"train", "epochs", "epochs", "Training epochs", "20", false, kTrainCommands},
      {"train", "batch_size", "batch-size", "Examples per SGD step", "64", false, kTrainCommands},
      {"train", "lr_start", "lr-start", "Learning rate of the first epoch", "0.01", false, kTrainCommands},
      {"train", "lr_end", "lr-end", "Learning rate of the last epoch", "0.0001", false, kTrainCommands},
      {"train", "momentum", "momentum", "SGD momentum", "0", false, kTrainCommands},
      {"train", "weight_decay", "weight-decay", "L2 weight decay", "0", false, kTrainCommands},
      {"train", "lambda1", "lambda1", "Weight of the pose loss", "1", false, kTrainCommands},
      {"train", "lambda2", "lambda2", "Weight of the tie loss", "0.1", false, kTrainCommands},
      {"train", "seed", "seed", "Seed for initialization, example order and dropout", "1", false, kTrainCommands},
      {"train", "precision", "precision", "Arithmetic for training: float or double", "float", false,
       kTrainCommands},
      {"train", "examples_per_epoch", "examples-per-epoch", "Examples visited per epoch; 0 visits all", "0", false,
       kTrainCommands},
      {"train", "eval_every", "eval-every", "Evaluate on the test split every this many epochs; 0 disables", "1",
       false, kTrainCommands},

      {"finetune", "from", "from", "Checkpoint to start from", "", false, {"finetune"}},
      {"finetune", "k_per_class", "k-per-class", "Labelled training images per class; 0 uses all", "0", false,
       {"finetune"}},

      {"eval", "checkpoint", "checkpoint", "Checkpoint to evaluate", "", false, {"eval"}},
      {"eval", "space", "space", "Embedding slice for retrieval and distances: identity, pose or full", "identity",
       false, {"eval"}},
      {"eval", "k", "k", "Neighbours per retrieval query", "5", false, {"eval"}},
      {"eval", "split", "eval-split", "Instances to evaluate: test, train or all", "test", false, {"eval"}},
      {"eval", "queries", "queries", "Retrieval queries drawn in the grid image", "8", false, {"eval"}},

      {"gradcheck", "seed", "check-seed", "Seed for parameters and inputs", "2024", false, {"gradcheck"}},
      {"gradcheck", "coords", "coords", "Coordinates probed per parameter tensor; 0 probes all", "24", false,
       {"gradcheck"}},
      {"gradcheck", "h", "step", "Central-difference step", "1e-5", false, {"gradcheck"}},

      {"ablate", "sizes", "sizes", "Comma-separated fc7 sizes", "16,32,64,128,256,512,1024", false, {"ablate-fc7"}},

      {"output", "dir", "output", "Output directory; defaults to <output root>/<command>", "@root/@command", false,
       {"pairs", "train", "finetune", "eval", "gradcheck", "ablate-fc7"}},
  };
  return table;
}

std::filesystem::path output_root() {
  const char *env = std::getenv("DISC_OUTPUT_ROOT");
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("runs");
}

namespace {

bool applies(const OptionSpec &o, const std::string &command) {
  return std::find(o.commands.begin(), o.commands.end(), command) != o.commands.end();
}

std::string expand(std::string value, const std::string &command) {
  if (value.rfind("@root/", 0) == 0)
    value = (output_root() / value.substr(6)).string();
  if (const auto at = value.find("@command"); at != std::string::npos)
    value.replace(at, 8, command);
  return value;
}

} // namespace

IniDocument resolve_config(IniDocument doc, const std::string &command) {
  std::vector<std::string> sections;
  for (const auto &o : option_table())
    if (std::find(sections.begin(), sections.end(), o.section) == sections.end())
      sections.push_back(o.section);
  doc.require_known_sections(sections);
  for (const auto &section : sections) {
    std::vector<std::string> keys;
    for (const auto &o : option_table())
      if (o.section == section)
        keys.push_back(o.key);
    doc.require_known_keys(section, keys);
  }
  for (const auto &o : option_table())
    if (applies(o, command) && !doc.has(o.section, o.key))
      doc.set(o.section, o.key, expand(o.fallback, command));
  return doc;
}

namespace {

using json = nlohmann::ordered_json;

// ---- configuration readers

std::size_t get_count(const IniDocument &doc, const std::string &section, const std::string &key) {
  const auto v = doc.get_int(section, key, 0);
  if (v < 0)
    throw ConfigError(doc.where(*doc.find(section, key)) + "'" + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

std::string get_choice(const IniDocument &doc, const std::string &section, const std::string &key,
                       const std::vector<std::string> &choices) {
  const auto v = doc.get_string(section, key, "");
  if (std::find(choices.begin(), choices.end(), v) == choices.end()) {
    std::string list;
    for (const auto &c : choices)
      list += (list.empty() ? "" : ", ") + c;
    const auto *e = doc.find(section, key);
    throw ConfigError((e ? doc.where(*e) : std::string()) + "'" + key + "' must be one of " + list + ", got '" + v +
                      "'");
  }
  return v;
}

std::filesystem::path get_path(const IniDocument &doc, const std::string &section, const std::string &key) {
  const auto v = doc.get_string(section, key, "");
  if (v.empty())
    throw ConfigError("[" + section + "] " + key + " is required");
  return v;
}

std::vector<int> parse_int_list(const std::string &text, const std::string &what) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(part, &used));
      if (used != part.size())
        throw std::invalid_argument("trailing");
    } catch (const std::exception &) {
      throw ConfigError(what + ": '" + part + "' is not an integer");
    }
  }
  if (out.empty())
    throw ConfigError(what + " is empty");
  return out;
}

pairs::ViewpointGrid parse_grid(const std::string &text) {
  const auto x = text.find('x');
  if (x == std::string::npos)
    throw ConfigError("grid must be CxR, got '" + text + "'");
  const auto c = parse_int_list(text.substr(0, x), "grid cameras");
  const auto r = parse_int_list(text.substr(x + 1), "grid rotations");
  pairs::ViewpointGrid g{c.at(0), r.at(0), false};
  g.validate();
  return g;
}

std::vector<pairs::VideoSequence> video_sequences(const std::vector<pairs::Shot> &shots) {
  std::map<int, int> frames;
  for (const auto &s : shots)
    frames[s.sequence] = std::max(frames[s.sequence], s.frame + 1);
  std::vector<pairs::VideoSequence> out;
  for (const auto &[id, n] : frames)
    out.push_back({id, n});
  return out;
}

pairs::CameraPairSet pair_set(const IniDocument &doc, const pairs::ViewpointGrid &grid,
                              const std::vector<pairs::Shot> *shots) {
  const auto relations = doc.get_string("pairs", "relations", "");
  if (!relations.empty()) {
    std::ifstream in(relations);
    if (!in)
      throw IoError("cannot read relations file " + relations);
    std::stringstream text;
    text << in.rdbuf();
    const auto descriptors = pairs::relations_from_json(text.str());
    if (std::holds_alternative<pairs::GridRelation>(descriptors.at(0))) {
      std::vector<pairs::GridRelation> rel;
      for (const auto &d : descriptors)
        rel.push_back(std::get<pairs::GridRelation>(d));
      return pairs::enumerate_grid_pairs(grid, rel);
    }
    pairs::CameraPairSet set;
    set.descriptors = descriptors;
    for (const auto &d : descriptors)
      if (std::get<pairs::VideoRelation>(d).delta <= 0)
        throw ConfigError(relations + ": video deltas must be positive");
    return set;
  }
  const auto preset = doc.get_string("pairs", "preset", "");
  if (preset.rfind("video:", 0) == 0) {
    if (!shots)
      throw ConfigError("video presets need a dataset");
    return pairs::enumerate_video_pairs(video_sequences(*shots), parse_int_list(preset.substr(6), "video deltas"));
  }
  return pairs::enumerate_grid_pairs(grid, preset);
}

net::NetSpec model_spec(const IniDocument &doc, std::size_t categories, std::size_t pose_labels, bool baseline,
                        std::optional<std::size_t> image_size = std::nullopt) {
  const auto preset = get_choice(doc, "model", "preset", {"desk", "paper"});
  auto spec = preset == "desk" ? net::desk_preset(categories, pose_labels) : net::paper_preset(categories, pose_labels);
  const auto overridden = [&](const char *key) {
    const auto v = doc.get_string("model", key, "preset");
    return !v.empty() && v != "preset";
  };
  if (image_size)
    spec.input_shape = {3, *image_size, *image_size};
  if (overridden("layers"))
    spec.layers = net::parse_layers(doc.get_string("model", "layers", ""));
  if (overridden("init_std"))
    spec.init_std = doc.get_double("model", "init_std", 0.0);
  if (overridden("dropout"))
    spec.dropout_rate = doc.get_double("model", "dropout", 0.5);
  spec.tie_form = get_choice(doc, "model", "tie_loss", {"norm", "squared"}) == "norm" ? net::TieLossForm::Norm
                                                                                       : net::TieLossForm::SquaredNorm;
  spec.category_stream = get_choice(doc, "model", "category_stream", {"left", "right"}) == "left"
                             ? net::CategoryStream::Left
                             : net::CategoryStream::Right;
  if (overridden("fc7"))
    spec = net::with_embedding_size(spec, get_count(doc, "model", "fc7"));
  if (baseline)
    spec = net::as_baseline(spec);
  spec.validate();
  return spec;
}

harness::TrainConfig train_config(const IniDocument &doc) {
  harness::TrainConfig c;
  c.epochs = get_count(doc, "train", "epochs");
  c.batch_size = get_count(doc, "train", "batch_size");
  c.lr_start = doc.get_double("train", "lr_start", c.lr_start);
  c.lr_end = doc.get_double("train", "lr_end", c.lr_end);
  c.momentum = doc.get_double("train", "momentum", c.momentum);
  c.weight_decay = doc.get_double("train", "weight_decay", c.weight_decay);
  c.loss_weights.lambda1 = doc.get_double("train", "lambda1", 1.0);
  c.loss_weights.lambda2 = doc.get_double("train", "lambda2", 0.1);
  c.seed = static_cast<std::uint64_t>(doc.get_int("train", "seed", 1));
  c.precision = get_choice(doc, "train", "precision", {"float", "double"}) == "float" ? harness::Precision::Float
                                                                                       : harness::Precision::Double;
  c.examples_per_epoch = get_count(doc, "train", "examples_per_epoch");
  c.validate();
  return c;
}

// ---- shared command plumbing

struct Data {
  sim::LoadedDataset dataset;
  harness::ImageBank bank;
  pairs::SplitSpec split;
};

Data load_data(const IniDocument &doc) {
  Data d;
  d.dataset = sim::load_dataset(get_path(doc, "dataset", "dir"));
  d.bank = harness::standardized_bank(d.dataset.images);
  d.split = pairs::split_instances(d.dataset.shots, doc.get_double("dataset", "split", 0.75),
                                   static_cast<std::uint64_t>(doc.get_int("dataset", "split_seed", 1)));
  return d;
}

std::set<int> split_instances_named(const Data &d, const std::string &which) {
  if (which == "train")
    return d.split.train_set();
  if (which == "test")
    return d.split.test_set();
  auto all = d.split.train_set();
  const auto test = d.split.test_set();
  all.insert(test.begin(), test.end());
  return all;
}

std::filesystem::path prepare_output(const IniDocument &doc) {
  const auto dir = get_path(doc, "output", "dir");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_file(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text) || !out.flush())
    throw IoError("cannot write " + path.string());
}

void write_resolved(const std::filesystem::path &dir, const IniDocument &doc) {
  write_file(dir / "resolved.ini", doc.to_string());
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string describe(const pairs::PairDescriptor &d) {
  if (const auto *g = std::get_if<pairs::GridRelation>(&d)) {
    std::string s = "cam " + std::to_string(g->cam_offset) + ", rot " + std::to_string(g->rot_offset);
    if (g->anchor_camera)
      s += " from camera " + std::to_string(*g->anchor_camera);
    return s;
  }
  const auto &v = std::get<pairs::VideoRelation>(d);
  return "delta " + std::to_string(v.delta) + " in sequence " + std::to_string(v.sequence);
}

std::string summary(const harness::TrainResult &r) {
  const auto &last = r.log.rows().back();
  std::string s = "epoch " + std::to_string(last.epoch + 1) + ": total loss " + fmt(last.total_loss) +
                  ", train accuracy " + fmt(last.train_accuracy);
  if (last.test_top1)
    s += ", test top-1 " + fmt(*last.test_top1) + ", top-5 " + fmt(*last.test_top5);
  return s;
}

void save_run(const std::filesystem::path &dir, const harness::TrainResult &r) {
  harness::save_checkpoint(dir / "final.ckpt", r.checkpoint);
  r.log.write(dir / "metrics.csv", dir / "timing.csv");
}

// ---- commands

int cmd_gen(const IniDocument &doc, std::ostream &out) {
  sim::DatasetOptions o;
  o.num_categories = static_cast<int>(doc.get_int("dataset", "categories", 8));
  o.instances_per_category = static_cast<int>(doc.get_int("dataset", "instances", 8));
  o.first_family = static_cast<int>(doc.get_int("dataset", "first_family", 0));
  o.video_layout = doc.get_bool("dataset", "video_layout", false);
  o.overwrite = doc.get_bool("dataset", "overwrite", false);
  sim::RenderConfig r;
  r.image_size = get_count(doc, "dataset", "image_size");
  r.grid = {static_cast<int>(doc.get_int("dataset", "cameras", 8)),
            static_cast<int>(doc.get_int("dataset", "rotations", 8)), false};
  r.azimuth_arc_degrees = doc.get_double("dataset", "azimuth", 60.0);
  r.rotation_arc_degrees = doc.get_double("dataset", "rotation_arc", 157.5);
  r.noise_std = doc.get_double("dataset", "noise", 0.02);
  r.seed = static_cast<std::uint64_t>(doc.get_int("dataset", "seed", 1));
  const auto dir = get_path(doc, "dataset", "dir");
  const auto shots = sim::generate_dataset(o, r, dir);
  write_resolved(dir, doc);
  out << "wrote " << shots.size() << " shots to " << dir.string() << "\n";
  return kOk;
}

int cmd_pairs(const IniDocument &doc, std::ostream &out) {
  const auto grid_text = doc.get_string("pairs", "grid", "");
  const bool report = doc.get_bool("pairs", "report", false);
  const auto dir = prepare_output(doc);
  if (!grid_text.empty()) {
    const auto set = pair_set(doc, parse_grid(grid_text), nullptr);
    write_file(dir / "relations.json", pairs::relations_to_json(set));
    write_resolved(dir, doc);
    out << set.size() << " labels\n";
    if (report)
      for (std::size_t i = 0; i < set.size(); ++i)
        out << "  label " << i << ": " << describe(set.descriptors[i]) << "\n";
    return kOk;
  }
  const auto data_dir = get_path(doc, "dataset", "dir");
  const auto info = sim::read_dataset_info(data_dir / sim::kDatasetInfo);
  const auto shots = pairs::read_shot_manifest(data_dir / sim::kShotManifest);
  const auto split = pairs::split_instances(shots, doc.get_double("dataset", "split", 0.75),
                                            static_cast<std::uint64_t>(doc.get_int("dataset", "split_seed", 1)));
  const auto set = pair_set(doc, info.render.grid, &shots);
  const auto which = get_choice(doc, "pairs", "split", {"train", "test", "all"});
  std::set<int> instances = which == "test" ? split.test_set() : split.train_set();
  if (which == "all") {
    const auto test = split.test_set();
    instances.insert(test.begin(), test.end());
  }
  pairs::PairOptions po;
  po.subsample_every = static_cast<int>(doc.get_int("pairs", "subsample", 1));
  const auto prs = pairs::generate_pairs(shots, set, instances, po);
  pairs::write_pair_manifest(dir / "pairs.jsonl", prs);
  write_file(dir / "relations.json", pairs::relations_to_json(set));
  write_resolved(dir, doc);
  out << set.size() << " labels, " << prs.size() << " pairs\n";
  if (report) {
    std::vector<std::size_t> counts(set.size(), 0);
    for (const auto &p : prs)
      ++counts[p.pose_label];
    for (std::size_t i = 0; i < set.size(); ++i)
      out << "  label " << i << " (" << describe(set.descriptors[i]) << "): " << counts[i] << " pairs\n";
  }
  return kOk;
}

struct TrainingInputs {
  Data data;
  pairs::CameraPairSet set;
  std::vector<pairs::PairedExample> pairs;
  std::vector<harness::Example> test;
};

TrainingInputs training_inputs(const IniDocument &doc) {
  TrainingInputs t;
  t.data = load_data(doc);
  t.set = pair_set(doc, t.data.dataset.info.render.grid, &t.data.dataset.shots);
  pairs::PairOptions po;
  po.subsample_every = static_cast<int>(doc.get_int("pairs", "subsample", 1));
  t.pairs = pairs::generate_pairs(t.data.dataset.shots, t.set, t.data.split.train_set(), po);
  t.test = harness::shot_examples(t.data.dataset.shots, t.data.split.test_set());
  return t;
}

int cmd_train(const IniDocument &doc, std::ostream &out) {
  const auto config = train_config(doc);
  const bool baseline = doc.get_bool("model", "baseline", false);
  auto in = training_inputs(doc);
  const std::size_t categories = static_cast<std::size_t>(in.data.dataset.info.options.num_categories);
  const auto spec = model_spec(doc, categories, baseline ? 0 : in.set.size(), baseline,
                               in.data.dataset.info.render.image_size);
  // Both models see the same images in the same order: the baseline trains
  // on the left image of every pair.
  const auto examples = baseline
                            ? harness::single_examples(pairs::left_image_set(in.pairs, in.data.dataset.shots))
                            : harness::pair_examples(in.pairs);
  const auto dir = prepare_output(doc);
  write_resolved(dir, doc);
  harness::TrainOptions options;
  options.checkpoint_dir = dir / "checkpoints";
  options.eval_every = get_count(doc, "train", "eval_every");
  options.on_epoch = [&](const harness::EpochMetrics &m) {
    out << "epoch " << m.epoch + 1 << "/" << config.epochs << "  lr " << m.lr << "  loss " << fmt(m.total_loss);
    if (m.test_top1)
      out << "  test top-1 " << fmt(*m.test_top1);
    out << "\n" << std::flush;
  };
  const auto result = harness::train(spec, net::init_parameters<float>(spec, config.seed), in.data.bank, examples,
                                     in.test, config, options);
  save_run(dir, result);
  write_file(dir / "relations.json", pairs::relations_to_json(in.set));
  out << summary(result) << "\n";
  return kOk;
}

int cmd_finetune(const IniDocument &doc, std::ostream &out) {
  const auto config = train_config(doc);
  const auto source = harness::load_checkpoint(get_path(doc, "finetune", "from"));
  const auto data = load_data(doc);
  const auto target =
      harness::finetune_spec(source.spec, static_cast<std::size_t>(data.dataset.info.options.num_categories));
  const auto train = harness::shot_examples(data.dataset.shots, data.split.train_set());
  const auto test = harness::shot_examples(data.dataset.shots, data.split.test_set());
  const auto k = get_count(doc, "finetune", "k_per_class");
  const auto dir = prepare_output(doc);
  write_resolved(dir, doc);
  harness::TrainOptions options;
  options.checkpoint_dir = dir / "checkpoints";
  options.eval_every = get_count(doc, "train", "eval_every");
  const auto result = harness::finetune(source, target, data.bank, train, test, config,
                                        k ? std::optional<std::size_t>(k) : std::nullopt, options);
  save_run(dir, result);
  out << summary(result) << "\n";
  return kOk;
}

int cmd_eval(const IniDocument &doc, std::ostream &out) {
  const auto ck = harness::load_checkpoint(get_path(doc, "eval", "checkpoint"));
  const auto data = load_data(doc);
  const auto examples = harness::shot_examples(
      data.dataset.shots, split_instances_named(data, get_choice(doc, "eval", "split", {"test", "train", "all"})));
  const auto space_name = get_choice(doc, "eval", "space", {"identity", "pose", "full"});
  const auto space = space_name == "identity" ? net::EmbeddingSpace::Identity
                     : space_name == "pose"   ? net::EmbeddingSpace::Pose
                                              : net::EmbeddingSpace::Full;
  if (space == net::EmbeddingSpace::Pose && ck.spec.kind == net::ModelKind::Baseline)
    throw ConfigError("the baseline has no pose embedding");
  const auto k = get_count(doc, "eval", "k");
  const auto queries = get_count(doc, "eval", "queries");
  const auto dir = prepare_output(doc);
  write_resolved(dir, doc);

  const auto result = harness::evaluate(ck.spec, ck.params, data.bank, examples);
  std::vector<std::size_t> refs, labels;
  for (const auto &e : examples) {
    refs.push_back(e.left);
    labels.push_back(*e.category);
  }
  const auto index = probe::build_index(ck.spec, ck.params, data.bank, refs, space);
  const auto stats = probe::distance_stats(index, labels);
  probe::write_confusion_csv(dir / "confusion.csv", result.confusion);
  probe::write_distance_csv(dir / "distances.csv", stats);
  probe::write_distance_heatmap(dir / "distances.pgm", stats);
  std::vector<probe::RetrievalRow> rows;
  const std::size_t q = std::min(queries, refs.size());
  for (std::size_t i = 0; i < q; ++i) {
    const std::size_t row = i * refs.size() / q;
    rows.push_back({refs[row], probe::knn_retrieve(index, index.row(row), k, refs[row])});
  }
  if (!rows.empty())
    probe::write_retrieval_grid(dir / "retrieval.ppm", rows, data.dataset.images);

  json j;
  j["count"] = result.count;
  j["top1"] = result.top1;
  j["top5"] = result.top5;
  j["space"] = space_name;
  j["mean_within"] = stats.mean_within ? json(*stats.mean_within) : json(nullptr);
  j["mean_between"] = stats.mean_between ? json(*stats.mean_between) : json(nullptr);
  j["ratio"] = stats.ratio ? json(*stats.ratio) : json(nullptr);
  j["ratio_status"] = stats.status == probe::RatioStatus::Defined    ? "defined"
                      : stats.status == probe::RatioStatus::Infinite ? "infinite"
                                                                     : "undefined";
  write_file(dir / "metrics.json", j.dump(2) + "\n");
  out << result.count << " images: top-1 " << fmt(result.top1) << ", top-5 " << fmt(result.top5)
      << ", between/within distance ratio " << (stats.ratio ? fmt(*stats.ratio) : j["ratio_status"].get<std::string>())
      << "\n";
  return kOk;
}

int cmd_gradcheck(const IniDocument &doc, std::ostream &out) {
  const bool baseline = doc.get_bool("model", "baseline", false);
  const pairs::ViewpointGrid grid{static_cast<int>(doc.get_int("dataset", "cameras", 8)),
                                  static_cast<int>(doc.get_int("dataset", "rotations", 8)), false};
  const auto set = pair_set(doc, grid, nullptr);
  const auto spec = model_spec(doc, get_count(doc, "dataset", "categories"), baseline ? 0 : set.size(), baseline);
  GradCheckOptions options;
  options.h = doc.get_double("gradcheck", "h", 1e-5);
  options.max_coordinates_per_parameter = get_count(doc, "gradcheck", "coords");
  const auto seed = static_cast<std::uint64_t>(doc.get_int("gradcheck", "seed", 2024));
  options.seed = seed;
  const auto dir = prepare_output(doc);
  write_resolved(dir, doc);
  const auto report = net::network_gradcheck(spec, seed, options);
  for (const auto &[op, err] : report.per_op_errors)
    out << "  " << op << ": " << err << "\n";
  out << "max relative error " << report.max_relative_error << " over " << report.coordinates_checked
      << " coordinates (worst " << report.worst_parameter << "[" << report.worst_index << "])\n";
  if (report.max_relative_error > kGradCheckTolerance) {
    out << "FAILED: above " << kGradCheckTolerance << "\n";
    return kNumerical;
  }
  return kOk;
}

int cmd_ablate(const IniDocument &doc, std::ostream &out) {
  const auto config = train_config(doc);
  const auto sizes = parse_int_list(doc.get_string("ablate", "sizes", ""), "[ablate] sizes");
  auto in = training_inputs(doc);
  const auto examples = harness::single_examples(pairs::left_image_set(in.pairs, in.data.dataset.shots));
  const auto base = model_spec(doc, static_cast<std::size_t>(in.data.dataset.info.options.num_categories), 0, true,
                               in.data.dataset.info.render.image_size);
  const auto dir = prepare_output(doc);
  write_resolved(dir, doc);
  harness::TrainOptions options;
  options.eval_every = 0;
  std::string table = "fc7,top1,top5\n";
  out << "fc7     top-1   top-5\n";
  for (int size : sizes) {
    if (size <= 0)
      throw ConfigError("[ablate] sizes must be positive");
    const auto spec = net::with_embedding_size(base, static_cast<std::size_t>(size));
    const auto r = harness::train(spec, net::init_parameters<float>(spec, config.seed), in.data.bank, examples, {},
                                  config, options);
    const auto e = harness::evaluate(spec, r.checkpoint.params, in.data.bank, in.test);
    char line[96];
    std::snprintf(line, sizeof line, "%d,%.6f,%.6f\n", size, e.top1, e.top5);
    table += line;
    std::snprintf(line, sizeof line, "%-7d %.4f  %.4f\n", size, e.top1, e.top5);
    out << line << std::flush;
  }
  write_file(dir / "ablation.csv", table);
  return kOk;
}

using Handler = int (*)(const IniDocument &, std::ostream &);

Handler handler_for(const std::string &command) {
  if (command == "gen")
    return cmd_gen;
  if (command == "pairs")
    return cmd_pairs;
  if (command == "train")
    return cmd_train;
  if (command == "finetune")
    return cmd_finetune;
  if (command == "eval")
    return cmd_eval;
  if (command == "gradcheck")
    return cmd_gradcheck;
  return cmd_ablate;
}

std::string command_help(const std::string &command) {
  if (command == "gen")
    return "Render a synthetic turntable dataset";
  if (command == "pairs")
    return "Enumerate camera pairs and write a pair manifest";
  if (command == "train")
    return "Train the two-stream network or the baseline";
  if (command == "finetune")
    return "Fine-tune a checkpoint on another dataset";
  if (command == "eval")
    return "Evaluate a checkpoint and export retrieval and distance artifacts";
  if (command == "gradcheck")
    return "Finite-difference check of the full network";
  return "Sweep fc7 sizes on the baseline";
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"disentangling two-stream ConvNet toolkit", "discli"};
  app.require_subcommand(1);
  struct Bound {
    const OptionSpec *spec;
    CLI::Option *option;
    std::string value;
    bool flag = false;
  };
  std::deque<Bound> bound;
  std::map<std::string, std::string> config_paths;
  std::map<std::string, CLI::App *> subs;
  for (const auto &name : command_names()) {
    auto *sub = app.add_subcommand(name, command_help(name));
    subs[name] = sub;
    sub->add_option("--config", config_paths[name], "Configuration file; flags override its values");
    for (const auto &o : option_table()) {
      if (!applies(o, name))
        continue;
      auto &b = bound.emplace_back();
      b.spec = &o;
      const std::string help = o.help + (o.is_switch ? "" : " [" + o.section + "." + o.key + ", default " +
                                                                expand(o.fallback, name) + "]");
      b.option = o.is_switch ? sub->add_flag("--" + o.flag, b.flag, help)
                             : sub->add_option("--" + o.flag, b.value, help);
    }
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp &e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForAllHelp &e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError &e) {
    app.exit(e, out, err);
    return kConfig;
  }

  std::string command;
  for (const auto &[name, sub] : subs)
    if (sub->parsed())
      command = name;

  try {
    IniDocument doc;
    if (!config_paths[command].empty())
      doc = IniDocument::load(config_paths[command]);
    for (const auto &b : bound) {
      if (b.option->count() == 0 || !applies(*b.spec, command))
        continue;
      doc.set(b.spec->section, b.spec->key, b.spec->is_switch ? (b.flag ? "true" : "false") : b.value);
    }
    return handler_for(command)(resolve_config(std::move(doc), command), out);
  } catch (const ConfigError &e) {
    err << "configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError &e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const NumericalError &e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const IoError &e) {
    err << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const std::filesystem::filesystem_error &e) {
    err << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const nlohmann::json::exception &e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::invalid_argument &e) {
    err << "configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::out_of_range &e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kInternal;
  }
}

} // namespace disc::cli
