#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <omp.h>
#include <sstream>

#include <map>

#include "disc/errors.hpp"
#include "disc/gradcore/rng.hpp"
#include "disc/harness/train.hpp"

using namespace disc;
using namespace disc::harness;

namespace {

// A small labelled image bank: class c is a bright square at a class-specific
// position plus per-image noise, so it is learnable in a few hundred steps.
struct Toy {
  ImageBank images;
  std::vector<Example> singles;
  std::vector<Example> pairs;
};

Toy make_toy(std::size_t classes, std::size_t per_class, std::uint64_t seed) {
  Toy toy;
  Rng rng = keyed_rng(seed, {0x746f79});
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t k = 0; k < per_class; ++k) {
      Tensor<float> img(Shape{3, 32, 32});
      for (auto &v : img.values())
        v = static_cast<float>(0.3 + 0.1 * uniform01(rng));
      const std::size_t y0 = 4 + 6 * (c % 4), x0 = 4 + 6 * (c / 4) + k % 3;
      for (std::size_t ch = 0; ch < 3; ++ch)
        for (std::size_t y = y0; y < y0 + 6; ++y)
          for (std::size_t x = x0; x < x0 + 6; ++x)
            img[(ch * 32 + y) * 32 + x] = ch == c % 3 ? 0.9f : 0.6f;
      toy.singles.push_back({toy.images.size(), std::nullopt, c, std::nullopt});
      toy.images.push_back(std::move(img));
    }
  for (std::size_t i = 0; i + 1 < toy.singles.size(); ++i)
    if (toy.singles[i].category == toy.singles[i + 1].category)
      toy.pairs.push_back({i, i + 1, toy.singles[i].category, i % 3});
  return toy;
}

std::filesystem::path temp_dir() {
  auto p = std::filesystem::temp_directory_path() /
           ("disc_harness_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

TrainConfig quick_config(std::size_t epochs = 2) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 8;
  cfg.seed = 5;
  return cfg;
}

// ---- schedule

TEST(Schedule, PaperEndpoints) {
  for (std::size_t e : {15u, 20u}) {
    EXPECT_NEAR(lr_at(0, e, 0.01, 0.0001), 0.01, 1e-15);
    EXPECT_NEAR(lr_at(e - 1, e, 0.01, 0.0001), 0.0001, 1e-15);
  }
  EXPECT_NEAR(lr_at(1, 3, 0.01, 0.0001), 0.001, 1e-15);
  EXPECT_EQ(lr_at(0, 1, 0.01, 0.0001), 0.01);
  EXPECT_THROW(lr_at(3, 3, 0.01, 0.0001), std::invalid_argument);
}

TEST(Schedule, LogLinearAndMonotone) {
  for (std::size_t epochs : {2u, 15u, 20u, 37u}) {
    const double a = std::log(0.01), b = std::log(0.0001);
    for (std::size_t e = 0; e < epochs; ++e) {
      const double expected = a + (b - a) * static_cast<double>(e) / static_cast<double>(epochs - 1);
      EXPECT_NEAR(std::log(lr_at(e, epochs, 0.01, 0.0001)), expected, 1e-12);
      if (e > 0) {
        EXPECT_LE(lr_at(e, epochs, 0.01, 0.0001), lr_at(e - 1, epochs, 0.01, 0.0001));
      }
    }
  }
}

TEST(Config, Validation) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.lr_end = 0.02;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.lr_end = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.lr_start = 0.0;
  EXPECT_NO_THROW(cfg.validate()); // frozen schedule
  cfg = TrainConfig{};
  cfg.epochs = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.momentum = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.loss_weights.lambda1 = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Preprocess, StandardizedImages) {
  Tensor<float> img(Shape{3, 4, 4});
  Rng rng(3);
  for (auto &v : img.values())
    v = static_cast<float>(0.3 + 0.05 * uniform01(rng));
  const auto s = standardize_image(img);
  double mean = 0, sq = 0;
  for (float v : s.values()) {
    mean += v;
    sq += double(v) * v;
  }
  EXPECT_NEAR(mean / 48, 0.0, 1e-6);
  EXPECT_NEAR(sq / 48, 1.0, 1e-5);
  // Affine changes of brightness and contrast do not matter.
  Tensor<float> brighter(img.shape());
  for (std::size_t i = 0; i < img.size(); ++i)
    brighter[i] = 2.0f * img[i] + 0.1f;
  const auto t = standardize_image(brighter);
  for (std::size_t i = 0; i < img.size(); ++i)
    EXPECT_NEAR(s[i], t[i], 1e-4);
  const auto flat = standardize_image(Tensor<float>(Shape{1, 2, 2}, 0.7f));
  for (float v : flat.values())
    EXPECT_EQ(v, 0.0f);
  EXPECT_EQ(standardized_bank({img, brighter})[1], t);
}

// ---- scoring

TEST(Scoring, PerfectClassifier) {
  const std::size_t k = 4;
  std::vector<float> logits;
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < 20; ++i) {
    labels.push_back(i % k);
    for (std::size_t c = 0; c < k; ++c)
      logits.push_back(c == i % k ? 5.0f : 0.0f);
  }
  const auto r = score_logits(logits, labels, k);
  EXPECT_EQ(r.top1, 1.0);
  EXPECT_EQ(r.top5, 1.0);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b)
      EXPECT_EQ(r.confusion[a][b], a == b ? 5u : 0u);
}

TEST(Scoring, TiesBreakByClassIndex) {
  const float logits[4] = {1, 1, 1, 1};
  EXPECT_EQ(true_class_rank(logits, 4, 0), 0u);
  EXPECT_EQ(true_class_rank(logits, 4, 3), 3u);
  const float some[4] = {0, 2, 2, -1};
  EXPECT_EQ(true_class_rank(some, 4, 2), 1u);
  EXPECT_EQ(true_class_rank(some, 4, 0), 2u);
}

TEST(Scoring, UniformRandomLogitsMonteCarlo) {
  const std::size_t k = 10, n = 10000;
  Rng rng(99);
  std::vector<float> logits(n * k);
  std::vector<std::size_t> labels(n);
  for (auto &v : logits)
    v = static_cast<float>(uniform01(rng));
  for (auto &l : labels)
    l = uniform_index(rng, k);
  const auto r = score_logits(logits, labels, k);
  const double se1 = std::sqrt(0.1 * 0.9 / n), se5 = std::sqrt(0.5 * 0.5 / n);
  EXPECT_NEAR(r.top1, 0.1, 3 * se1);
  EXPECT_NEAR(r.top5, 0.5, 3 * se5);
}

TEST(Scoring, TopFiveNeverBelowTopOne) {
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    Rng rng(trial);
    const std::size_t k = 2 + uniform_index(rng, 12), n = 1 + uniform_index(rng, 40);
    std::vector<float> logits(n * k);
    std::vector<std::size_t> labels(n);
    for (auto &v : logits)
      v = static_cast<float>(uniform_index(rng, 4)); // many ties
    for (auto &l : labels)
      l = uniform_index(rng, k);
    const auto r = score_logits(logits, labels, k);
    EXPECT_GE(r.top5, r.top1);
    if (k <= 5) {
      EXPECT_EQ(r.top5, 1.0);
    }
  }
}

// ---- checkpoints

TEST(Checkpoints, RoundTripIsBitExact) {
  Checkpoint ck;
  ck.spec = net::desk_preset(8, 6);
  ck.params = net::init_parameters<float>(ck.spec, 3);
  ck.params.at(net::names::conv_bias(1))[0] = -0.0f;
  ck.params.at(net::names::conv_bias(1))[1] = std::numeric_limits<float>::denorm_min();
  ck.epoch = 7;
  ck.seed = 0xfeedbeefcafeULL;
  ck.config_digest = 42;
  ck.params.seed = ck.seed;
  const auto dir = temp_dir();
  save_checkpoint(dir / "a.ckpt", ck);
  const auto loaded = load_checkpoint(dir / "a.ckpt");
  EXPECT_EQ(loaded, ck);
  save_checkpoint(dir / "b.ckpt", loaded);
  std::ifstream a(dir / "a.ckpt", std::ios::binary), b(dir / "b.ckpt", std::ios::binary);
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(sa.str().substr(0, 4), "DISC");
  std::filesystem::remove_all(dir);
}

TEST(Checkpoints, CorruptInputsAreRejected) {
  Checkpoint ck;
  ck.spec = net::desk_preset(4, 3);
  ck.params = net::init_parameters<float>(ck.spec, 1);
  const auto bytes = encode_checkpoint(ck);
  EXPECT_THROW(decode_checkpoint("XXXX" + bytes.substr(4)), DataError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), DataError);
  EXPECT_THROW(decode_checkpoint(bytes + "x"), DataError);
  auto version = bytes;
  version[4] = 9;
  EXPECT_THROW(decode_checkpoint(version), DataError);

  // A store whose tensor shape disagrees with the description.
  Checkpoint wrong = ck;
  wrong.spec.num_categories = 5;
  try {
    decode_checkpoint(encode_checkpoint(wrong));
    FAIL();
  } catch (const DataError &e) {
    EXPECT_NE(std::string(e.what()).find("category_head.weight"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_checkpoint("/nonexistent/x.ckpt"), IoError);
}

TEST(MetricLogs, CsvLayout) {
  MetricLog log;
  EpochMetrics m;
  m.epoch = 0;
  m.lr = 0.01;
  m.total_loss = 1.5;
  m.test_top1 = 0.25;
  m.test_top5 = 0.75;
  m.wall_seconds = 3.0;
  log.append(m);
  m.epoch = 1;
  m.test_top1.reset();
  m.test_top5.reset();
  log.append(m);
  EXPECT_EQ(log.to_csv(), std::string(MetricLog::kHeader) + "\n0,0.01,0,0,0,1.5,0,0.25,0.75\n1,0.01,0,0,0,1.5,0,,\n");
  EXPECT_EQ(log.timing_csv(), "epoch,wall_seconds\n0,3\n1,3\n");
}

// ---- training

TEST(Training, ZeroLearningRateKeepsParameters) {
  const auto toy = make_toy(4, 6, 1);
  const auto spec = net::desk_preset(4, 3);
  const auto init = net::init_parameters<float>(spec, 2);
  auto cfg = quick_config(3);
  cfg.lr_start = cfg.lr_end = 0.0;
  EXPECT_EQ(train(spec, init, toy.images, toy.pairs, {}, cfg).checkpoint.params.entries(), init.entries());
  cfg.precision = Precision::Double;
  EXPECT_EQ(train(spec, init, toy.images, toy.singles, {}, cfg).checkpoint.params.entries(), init.entries());
}

TEST(Training, SameSeedSameBytes) {
  const auto toy = make_toy(4, 6, 1);
  const auto spec = net::desk_preset(4, 3);
  const auto init = net::init_parameters<float>(spec, 2);
  const auto cfg = quick_config(2);
  const auto a = train(spec, init, toy.images, toy.pairs, toy.singles, cfg);
  const auto b = train(spec, init, toy.images, toy.pairs, toy.singles, cfg);
  EXPECT_EQ(a.log.to_csv(), b.log.to_csv());
  EXPECT_EQ(encode_checkpoint(a.checkpoint), encode_checkpoint(b.checkpoint));
  EXPECT_NE(a.checkpoint.params, init);
  auto other = cfg;
  other.seed = 6;
  EXPECT_NE(train(spec, init, toy.images, toy.pairs, toy.singles, other).checkpoint.params, a.checkpoint.params);
}

TEST(Training, ThreadCountDoesNotChangeResults) {
  const auto toy = make_toy(4, 6, 1);
  const auto spec = net::desk_preset(4, 3);
  const auto init = net::init_parameters<float>(spec, 2);
  const auto cfg = quick_config(1);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto one = train(spec, init, toy.images, toy.pairs, {}, cfg);
  omp_set_num_threads(3);
  const auto three = train(spec, init, toy.images, toy.pairs, {}, cfg);
  omp_set_num_threads(saved);
  EXPECT_EQ(encode_checkpoint(one.checkpoint), encode_checkpoint(three.checkpoint));
  EXPECT_EQ(one.log.to_csv(), three.log.to_csv());
}

TEST(Training, BaselineAndPairRunsShareExampleOrder) {
  const auto toy = make_toy(4, 6, 1);
  const auto spec = net::desk_preset(4, 3);
  auto cfg = quick_config(3);
  cfg.examples_per_epoch = 10;
  TrainOptions opts;
  opts.record_trace = true;
  // The left-image set is index-aligned with the pair list.
  std::vector<Example> lefts;
  for (const auto &p : toy.pairs)
    lefts.push_back({p.left, std::nullopt, p.category, std::nullopt});
  const auto base = net::as_baseline(spec);
  const auto a = train(spec, net::init_parameters<float>(spec, 1), toy.images, toy.pairs, {}, cfg, opts);
  const auto b = train(base, net::init_parameters<float>(base, 1), toy.images, lefts, {}, cfg, opts);
  EXPECT_EQ(a.trace.size(), 30u);
  EXPECT_EQ(a.trace, b.trace);
}

TEST(Training, WritesCheckpointEveryEpoch) {
  const auto toy = make_toy(4, 4, 1);
  const auto spec = net::as_baseline(net::desk_preset(4, 0));
  const auto dir = temp_dir();
  TrainOptions opts;
  opts.checkpoint_dir = dir;
  const auto r = train(spec, net::init_parameters<float>(spec, 1), toy.images, toy.singles, toy.singles,
                       quick_config(3), opts);
  ASSERT_EQ(r.log.size(), 3u);
  for (int e = 1; e <= 3; ++e) {
    const auto ck = load_checkpoint(dir / ("epoch_00" + std::to_string(e) + ".ckpt"));
    EXPECT_EQ(ck.epoch, static_cast<std::uint32_t>(e));
  }
  EXPECT_EQ(load_checkpoint(dir / "epoch_003.ckpt"), r.checkpoint);
  EXPECT_TRUE(r.log.rows()[2].test_top1.has_value());
  std::filesystem::remove_all(dir);
}

TEST(Training, DivergenceAbortsAndKeepsLastGoodCheckpoint) {
  const auto toy = make_toy(4, 6, 1);
  const auto spec = net::as_baseline(net::desk_preset(4, 0));
  const auto dir = temp_dir();
  TrainOptions opts;
  opts.checkpoint_dir = dir;
  auto cfg = quick_config(4);
  auto init = net::init_parameters<float>(spec, 1);
  // Healthy first epoch, then a poisoned update.
  cfg.lr_start = cfg.lr_end = 1e-3;
  opts.on_epoch = [&](const EpochMetrics &) {};
  const auto first = train(spec, init, toy.images, toy.singles, {}, quick_config(1), opts);
  auto bad = first.checkpoint.params;
  bad.at(net::names::category_weight).fill(std::numeric_limits<float>::infinity());
  EXPECT_THROW(train(spec, bad, toy.images, toy.singles, {}, cfg, opts), NumericalError);
  EXPECT_TRUE(std::filesystem::exists(dir / "epoch_001.ckpt"));
  cfg.lr_start = cfg.lr_end = 1e9;
  EXPECT_THROW(train(spec, init, toy.images, toy.singles, {}, cfg, opts), NumericalError);
  std::filesystem::remove_all(dir);
}

TEST(Training, RejectsInvalidExamples) {
  const auto toy = make_toy(4, 2, 1);
  const auto spec = net::desk_preset(4, 3);
  const auto init = net::init_parameters<float>(spec, 1);
  const auto cfg = quick_config(1);
  EXPECT_THROW(train(spec, init, toy.images, {}, {}, cfg), DataError);
  EXPECT_THROW(train(spec, init, toy.images, {{99, std::nullopt, 0, std::nullopt}}, {}, cfg), DataError);
  EXPECT_THROW(train(spec, init, toy.images, {{0, 1, std::nullopt, std::nullopt}}, {}, cfg), DataError);
  EXPECT_THROW(train(spec, init, toy.images, {{0, 1, 0, 3}}, {}, cfg), DataError);
  EXPECT_THROW(train(spec, init, toy.images, {{0, std::nullopt, 0, 1}}, {}, cfg), DataError);
  const auto base = net::as_baseline(spec);
  EXPECT_THROW(train(base, net::init_parameters<float>(base, 1), toy.images, toy.pairs, {}, cfg), DataError);
  EXPECT_THROW(train(base, init, toy.images, toy.singles, {}, cfg), ConfigError);
}

TEST(Training, OverfitsSixtyFourExamples) {
  const auto toy = make_toy(8, 8, 3);
  const auto spec = net::as_baseline(net::desk_preset(8, 0));
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 16;
  cfg.lr_start = cfg.lr_end = 0.01;
  cfg.seed = 1;
  TrainOptions opts;
  opts.eval_every = 10;
  double best = 0;
  opts.on_epoch = [&](const EpochMetrics &m) {
    if (m.test_top1)
      best = std::max(best, *m.test_top1);
  };
  ASSERT_EQ(toy.singles.size(), 64u);
  train(spec, net::init_parameters<float>(spec, 1), toy.images, toy.singles, toy.singles, cfg, opts);
  EXPECT_GE(best, 0.99);
}

// ---- fine-tuning

TEST(Finetune, KPerClassCounts) {
  const auto toy = make_toy(10, 8, 1);
  const auto subset = k_per_class(toy.singles, 5, 3);
  EXPECT_EQ(subset.size(), 50u);
  std::map<std::size_t, int> per;
  for (const auto &e : subset)
    ++per[*e.category];
  for (const auto &[c, n] : per)
    EXPECT_EQ(n, 5);
  EXPECT_EQ(subset, k_per_class(toy.singles, 5, 3));
  EXPECT_NE(subset, k_per_class(toy.singles, 5, 4));
  EXPECT_TRUE(std::is_sorted(subset.begin(), subset.end(),
                             [](const Example &a, const Example &b) { return a.left < b.left; }));
  EXPECT_THROW(k_per_class(toy.singles, 9, 3), DataError);
}

TEST(Finetune, ZeroLearningRateKeepsBackbone) {
  const auto toy = make_toy(4, 6, 1);
  const auto source_spec = net::desk_preset(8, 3);
  Checkpoint source{source_spec, net::init_parameters<float>(source_spec, 9), 1, 9, 0};
  const auto target = finetune_spec(source_spec, 4);
  auto cfg = quick_config(2);
  cfg.lr_start = cfg.lr_end = 0.0;
  const auto r = finetune(source, target, toy.images, toy.singles, {}, cfg, 2);
  for (const auto &[name, t] : r.checkpoint.params.entries()) {
    if (name == net::names::category_weight || name == net::names::category_bias) {
      EXPECT_EQ(t.shape()[0], 4u);
    } else {
      EXPECT_EQ(t, source.params.at(name)) << name; // backbone and unchanged pose head
    }
  }
}

TEST(Finetune, HeadsReinitialisedAndMismatchNamed) {
  const auto source_spec = net::desk_preset(8, 3);
  Checkpoint source{source_spec, net::init_parameters<float>(source_spec, 9), 1, 9, 0};
  const auto new_pose = finetune_spec(source_spec, 5, 6);
  const auto p = transfer_parameters(source, new_pose, 1);
  EXPECT_EQ(p.at(net::names::pose_weight).shape(), (Shape{6, 128}));
  EXPECT_EQ(p.at(net::names::fc_weight(1)), source.params.at(net::names::fc_weight(1)));

  auto wider = source_spec;
  wider.layers[0].units = 24;
  try {
    transfer_parameters(source, wider, 1);
    FAIL();
  } catch (const ConfigError &e) {
    EXPECT_NE(std::string(e.what()).find("conv1.weight"), std::string::npos) << e.what();
  }
}

// ---- gradient balance

double oracle_term_norm(const net::NetSpec &spec, const net::ParameterStore<float> &params, const ImageBank &images,
                        const std::vector<Example> &batch, int term) {
  // Each term alone as a loss of its own: labels and weights switch the
  // other terms off entirely.
  const net::Network<float> network(spec);
  std::map<std::string, std::vector<double>> sums;
  for (const auto &e : batch) {
    Graph<float> g;
    Rng l(0), r(0);
    const auto nodes = network.build_pair(g, params, images[e.left], images[*e.right], Mode::Eval, l, r);
    net::Labels labels;
    net::LossWeights w{1.0, 0.0};
    if (term == 0)
      labels.category = e.category;
    if (term == 1)
      labels.pose = e.pose;
    if (term == 2)
      w.lambda2 = 1.0;
    const auto loss = net::composite_loss(g, nodes, labels, w, spec.tie_form);
    g.backward(loss.total);
    for (const auto &[name, id] : g.parameters()) {
      const auto grad = g.parameter_grad(name);
      auto &acc = sums[name];
      acc.resize(grad.size());
      for (std::size_t i = 0; i < grad.size(); ++i)
        acc[i] += grad[i];
    }
  }
  double sq = 0;
  for (const auto &[name, v] : sums)
    for (double x : v)
      sq += (x / batch.size()) * (x / batch.size());
  return std::sqrt(sq);
}

TEST(GradBalance, MatchesTermIsolationOracle) {
  const auto toy = make_toy(4, 6, 1);
  const auto spec = net::desk_preset(4, 3);
  const auto params = net::init_parameters<float>(spec, 4);
  const std::vector<Example> batch(toy.pairs.begin(), toy.pairs.begin() + 6);
  const auto r = grad_balance_report(spec, params, toy.images, batch);
  EXPECT_NEAR(r.object_norm, oracle_term_norm(spec, params, toy.images, batch, 0), 1e-5 * r.object_norm);
  EXPECT_NEAR(r.pose_norm, oracle_term_norm(spec, params, toy.images, batch, 1), 1e-5 * r.pose_norm);
  EXPECT_NEAR(r.tie_norm, oracle_term_norm(spec, params, toy.images, batch, 2), 1e-5 * r.tie_norm);
  ASSERT_TRUE(r.suggested_lambda1 && r.suggested_lambda2);
  EXPECT_NEAR(*r.suggested_lambda1 * r.pose_norm, r.object_norm, 1e-12 * r.object_norm);
  EXPECT_NEAR(*r.suggested_lambda2 * r.tie_norm, r.object_norm, 1e-12 * r.object_norm);
}

TEST(GradBalance, IdenticalPairsHaveNoTieGradient) {
  const auto toy = make_toy(4, 6, 1);
  const auto spec = net::desk_preset(4, 3);
  const auto params = net::init_parameters<float>(spec, 4);
  std::vector<Example> batch;
  for (std::size_t i = 0; i < 4; ++i)
    batch.push_back({i, i, toy.singles[i].category, 1});
  const auto r = grad_balance_report(spec, params, toy.images, batch);
  EXPECT_EQ(r.tie_norm, 0.0);
  EXPECT_FALSE(r.suggested_lambda2.has_value());
  EXPECT_TRUE(r.suggested_lambda1.has_value());
  EXPECT_THROW(grad_balance_report(spec, params, toy.images, toy.singles), DataError);
}

} // namespace
