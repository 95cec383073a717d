#include "disc/harness/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <omp.h>
#include <unordered_map>

#include "disc/common/ini.hpp"
#include "disc/errors.hpp"
#include "disc/gradcore/rng.hpp"

namespace disc::harness {

using net::NetSpec;
using net::ParameterStore;

double lr_at(std::size_t epoch, std::size_t epochs, double lr_start, double lr_end) {
  if (epochs == 0 || epoch >= epochs)
    throw std::invalid_argument("lr_at: epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(epochs) +
                                ")");
  if (epochs == 1 || lr_start == lr_end)
    return lr_start;
  const double t = static_cast<double>(epoch) / static_cast<double>(epochs - 1);
  return std::exp(std::log(lr_start) + t * (std::log(lr_end) - std::log(lr_start)));
}

void TrainConfig::validate() const {
  if (epochs < 1)
    throw ConfigError("epochs must be at least 1");
  if (batch_size < 1)
    throw ConfigError("batch_size must be at least 1");
  const bool frozen = lr_start == 0.0 && lr_end == 0.0;
  if (!frozen && !(lr_end > 0.0 && lr_start >= lr_end))
    throw ConfigError("learning rates need lr_start >= lr_end > 0 (or both 0), got " + std::to_string(lr_start) +
                      " and " + std::to_string(lr_end));
  if (!std::isfinite(lr_start))
    throw ConfigError("lr_start must be finite");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw ConfigError("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0))
    throw ConfigError("weight_decay must be non-negative");
  try {
    loss_weights.validate();
  } catch (const std::invalid_argument &e) {
    throw ConfigError(e.what());
  }
}

std::string TrainConfig::to_text() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "epochs=%zu\nbatch_size=%zu\nlr_start=%.17g\nlr_end=%.17g\nmomentum=%.17g\nweight_decay=%.17g\n"
                "lambda1=%.17g\nlambda2=%.17g\nseed=%llu\nprecision=%s\nexamples_per_epoch=%zu\n",
                epochs, batch_size, lr_start, lr_end, momentum, weight_decay, loss_weights.lambda1,
                loss_weights.lambda2, static_cast<unsigned long long>(seed),
                precision == Precision::Double ? "double" : "float", examples_per_epoch);
  return buf;
}

Tensor<float> standardize_image(const Tensor<float> &image) {
  double sum = 0.0, sq = 0.0;
  for (float v : image.values()) {
    sum += v;
    sq += static_cast<double>(v) * v;
  }
  const double n = static_cast<double>(image.size());
  const double mean = sum / n;
  const double var = std::max(sq / n - mean * mean, 0.0);
  const double scale = var > 1e-12 ? 1.0 / std::sqrt(var) : 0.0;
  Tensor<float> out(image.shape());
  for (std::size_t i = 0; i < image.size(); ++i)
    out[i] = static_cast<float>((image[i] - mean) * scale);
  return out;
}

ImageBank standardized_bank(const std::vector<Tensor<float>> &images) {
  ImageBank out(images.size());
#pragma omp parallel for
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(images.size()); ++i)
    out[i] = standardize_image(images[i]);
  return out;
}

std::vector<Example> pair_examples(const std::vector<pairs::PairedExample> &pairs, bool with_category) {
  std::vector<Example> out;
  out.reserve(pairs.size());
  for (const auto &p : pairs) {
    Example e{p.left, p.right, std::nullopt, p.pose_label};
    if (with_category && p.category) {
      if (*p.category < 0)
        throw DataError("negative category label");
      e.category = static_cast<std::size_t>(*p.category);
    }
    out.push_back(e);
  }
  return out;
}

std::vector<Example> single_examples(const std::vector<pairs::SingleExample> &singles) {
  std::vector<Example> out;
  out.reserve(singles.size());
  for (const auto &s : singles) {
    if (s.category < 0)
      throw DataError("negative category label");
    out.push_back({s.shot, std::nullopt, static_cast<std::size_t>(s.category), std::nullopt});
  }
  return out;
}

std::vector<Example> shot_examples(const std::vector<pairs::Shot> &shots, const std::set<int> &instances) {
  std::vector<Example> out;
  for (std::size_t i = 0; i < shots.size(); ++i)
    if (instances.contains(shots[i].instance)) {
      if (shots[i].category < 0)
        throw DataError("negative category label");
      out.push_back({i, std::nullopt, static_cast<std::size_t>(shots[i].category), std::nullopt});
    }
  return out;
}

namespace {

void check_store(const NetSpec &spec, const ParameterStore<float> &params) {
  const auto expected = net::parameter_shapes(spec);
  if (params.entries().size() != expected.size())
    throw ConfigError("parameter store has " + std::to_string(params.entries().size()) + " tensors, model needs " +
                      std::to_string(expected.size()));
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto &[name, t] = params.entries()[i];
    if (name != expected[i].first || t.shape() != expected[i].second)
      throw ConfigError("parameter " + name + " " + to_string(t.shape()) + " does not match model tensor " +
                        expected[i].first + " " + to_string(expected[i].second));
  }
}

void check_examples(const NetSpec &spec, const ImageBank &images, const std::vector<Example> &examples,
                    const char *what, bool allow_pairs) {
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto &e = examples[i];
    auto fail = [&](const std::string &msg) {
      throw DataError(std::string(what) + " example " + std::to_string(i) + ": " + msg);
    };
    if (e.left >= images.size() || (e.right && *e.right >= images.size()))
      fail("image index out of range (" + std::to_string(images.size()) + " images)");
    if (e.category && *e.category >= spec.num_categories)
      fail("category " + std::to_string(*e.category) + " >= " + std::to_string(spec.num_categories));
    if (e.right) {
      if (!allow_pairs)
        fail("pairs are not allowed here");
      if (spec.kind != net::ModelKind::Disentangled)
        fail("the baseline network trains on single images only");
      if (!e.category && !e.pose)
        fail("a pair needs a category or a pose label");
      if (e.pose && *e.pose >= spec.num_pose_labels)
        fail("pose label " + std::to_string(*e.pose) + " >= " + std::to_string(spec.num_pose_labels));
    } else {
      if (!e.category)
        fail("a single image needs a category label");
      if (e.pose)
        fail("a single image cannot carry a pose label");
    }
  }
}

template <typename T> Tensor<T> image_as(const Tensor<float> &img) {
  if constexpr (std::is_same_v<T, float>)
    return img;
  else
    return img.template cast<T>();
}

template <typename T> std::size_t argmax(const Tensor<T> &t) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < t.size(); ++i)
    if (t[i] > t[best])
      best = i;
  return best;
}

struct StepOutcome {
  net::LossBreakdown loss;
  bool has_object = false, has_pose = false, has_tie = false;
  std::optional<bool> correct;
};

template <typename T>
net::LossNodes build_example(Graph<T> &g, const net::Network<T> &network, const ParameterStore<T> &params,
                             const ImageBank &images, const Example &e, const net::LossWeights &weights, Mode mode,
                             Rng &left_rng, Rng &right_rng, NodeId &category_logits) {
  const net::Labels labels{e.category, e.pose};
  if (e.right) {
    const auto nodes = network.build_pair(g, params, image_as<T>(images[e.left]), image_as<T>(images[*e.right]),
                                          mode, left_rng, right_rng);
    category_logits = nodes.category_logits;
    return net::composite_loss(g, nodes, labels, weights, network.spec().tie_form);
  }
  const auto nodes = network.build_single(g, params, image_as<T>(images[e.left]), mode, left_rng);
  category_logits = nodes.category_logits;
  return net::composite_loss(g, nodes, labels);
}

template <typename T>
TrainResult train_impl(const NetSpec &spec, const ParameterStore<float> &initial, const ImageBank &images,
                       const std::vector<Example> &train_set, const std::vector<Example> &test_set,
                       const TrainConfig &config, const TrainOptions &options) {
  const net::Network<T> network(spec);
  ParameterStore<T> params = initial.template cast<T>();
  auto &entries = params.entries();
  std::unordered_map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < entries.size(); ++i)
    slot.emplace(entries[i].first, i);
  std::vector<Tensor<T>> grads, velocity;
  for (const auto &[name, t] : entries) {
    grads.emplace_back(t.shape());
    if (config.momentum > 0)
      velocity.emplace_back(t.shape());
  }

  const std::uint64_t digest = fnv1a64(config.to_text());
  auto snapshot = [&](std::size_t completed) {
    Checkpoint ck;
    ck.spec = spec;
    ck.params = params.template cast<float>();
    ck.params.seed = config.seed;
    ck.epoch = static_cast<std::uint32_t>(completed);
    ck.seed = config.seed;
    ck.config_digest = digest;
    return ck;
  };

  const std::size_t per_epoch =
      config.examples_per_epoch > 0 ? std::min(config.examples_per_epoch, train_set.size()) : train_set.size();
  const auto chunk = static_cast<std::size_t>(std::max(1, omp_get_max_threads()));
  TrainResult result;
  std::optional<std::filesystem::path> last_good;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const double lr = lr_at(epoch, config.epochs, config.lr_start, config.lr_end);
    auto order = pairs::epoch_permutation(train_set.size(), config.seed, epoch);
    order.resize(per_epoch);

    double sums[4] = {0, 0, 0, 0};
    std::size_t counts[3] = {0, 0, 0};
    std::size_t correct = 0, classified = 0;

    for (std::size_t batch_start = 0; batch_start < per_epoch; batch_start += config.batch_size) {
      const std::size_t batch_end = std::min(per_epoch, batch_start + config.batch_size);
      for (auto &g : grads)
        g.fill(T{0});
      double batch_total = 0.0;

      for (std::size_t c0 = batch_start; c0 < batch_end; c0 += chunk) {
        const std::size_t c1 = std::min(batch_end, c0 + chunk);
        std::vector<Graph<T>> graphs(c1 - c0);
        std::vector<StepOutcome> outcomes(c1 - c0);
        std::exception_ptr failure;
#pragma omp parallel for schedule(static, 1) if (c1 - c0 > 1)
        for (std::size_t k = c0; k < c1; ++k) {
          try {
            const Example &e = train_set[order[k]];
            Rng left_rng = keyed_rng(config.seed, {0x64726f70ULL, epoch, k, 0});
            Rng right_rng = keyed_rng(config.seed, {0x64726f70ULL, epoch, k, 1});
            auto &g = graphs[k - c0];
            NodeId logits = 0;
            const auto nodes = build_example(g, network, params, images, e, config.loss_weights, Mode::Train,
                                             left_rng, right_rng, logits);
            auto &out = outcomes[k - c0];
            out.loss = net::breakdown(g, nodes);
            out.has_object = nodes.object.has_value();
            out.has_pose = nodes.pose.has_value();
            out.has_tie = nodes.tie.has_value();
            if (e.category)
              out.correct = argmax(g.value(logits)) == *e.category;
            g.backward(nodes.total);
          } catch (...) {
#pragma omp critical
            if (!failure)
              failure = std::current_exception();
          }
        }
        if (failure)
          std::rethrow_exception(failure);

        // Reduce in example order.
        for (std::size_t k = c0; k < c1; ++k) {
          const auto &g = graphs[k - c0];
          for (const auto &[name, id] : g.parameters())
            if (const auto *gr = g.grad_if_present(id)) {
              auto &acc = grads[slot.at(name)];
              for (std::size_t i = 0; i < acc.size(); ++i)
                acc[i] += (*gr)[i];
            }
          const auto &o = outcomes[k - c0];
          batch_total += o.loss.total;
          sums[3] += o.loss.total;
          if (o.has_object)
            sums[0] += o.loss.object_loss, ++counts[0];
          if (o.has_pose)
            sums[1] += o.loss.pose_loss, ++counts[1];
          if (o.has_tie)
            sums[2] += o.loss.tie_loss, ++counts[2];
          if (o.correct) {
            ++classified;
            correct += *o.correct ? 1 : 0;
          }
          if (options.record_trace)
            result.trace.push_back(order[k]);
        }
      }

      const double batch_mean = batch_total / static_cast<double>(batch_end - batch_start);
      if (!std::isfinite(batch_mean) || batch_mean > 1e6) {
        std::string msg = "training diverged at epoch " + std::to_string(epoch) + ", example " +
                          std::to_string(batch_start) + ": batch loss " + std::to_string(batch_mean);
        if (last_good)
          msg += "; last good checkpoint " + last_good->string();
        throw NumericalError(msg);
      }

      const T scale = T(1) / static_cast<T>(batch_end - batch_start);
      const T step = static_cast<T>(lr);
      const T decay = static_cast<T>(config.weight_decay);
      const T mu = static_cast<T>(config.momentum);
      for (std::size_t p = 0; p < entries.size(); ++p) {
        auto &theta = entries[p].second;
        auto &g = grads[p];
        for (std::size_t i = 0; i < theta.size(); ++i) {
          T d = g[i] * scale;
          if (config.weight_decay > 0)
            d += decay * theta[i];
          if (config.momentum > 0) {
            velocity[p][i] = mu * velocity[p][i] + d;
            d = velocity[p][i];
          }
          theta[i] -= step * d;
        }
      }
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.lr = lr;
    m.object_loss = counts[0] ? sums[0] / static_cast<double>(counts[0]) : 0.0;
    m.pose_loss = counts[1] ? sums[1] / static_cast<double>(counts[1]) : 0.0;
    m.tie_loss = counts[2] ? sums[2] / static_cast<double>(counts[2]) : 0.0;
    m.total_loss = per_epoch ? sums[3] / static_cast<double>(per_epoch) : 0.0;
    m.train_accuracy = classified ? static_cast<double>(correct) / static_cast<double>(classified) : 0.0;
    const bool last = epoch + 1 == config.epochs;
    if (!test_set.empty() && options.eval_every > 0 && ((epoch + 1) % options.eval_every == 0 || last)) {
      const auto eval = evaluate(spec, params.template cast<float>(), images, test_set);
      m.test_top1 = eval.top1;
      m.test_top5 = eval.top5;
    }
    if (options.checkpoint_dir) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%03zu.ckpt", epoch + 1);
      const auto path = *options.checkpoint_dir / name;
      save_checkpoint(path, snapshot(epoch + 1));
      last_good = path;
    }
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.log.append(m);
    if (options.on_epoch)
      options.on_epoch(m);
  }
  result.checkpoint = snapshot(config.epochs);
  return result;
}

} // namespace

TrainResult train(const NetSpec &spec, ParameterStore<float> initial, const ImageBank &images,
                  const std::vector<Example> &train_set, const std::vector<Example> &test_set,
                  const TrainConfig &config, const TrainOptions &options) {
  spec.validate();
  config.validate();
  check_store(spec, initial);
  if (train_set.empty())
    throw DataError("training set is empty");
  check_examples(spec, images, train_set, "training", true);
  check_examples(spec, images, test_set, "test", false);
  if (config.precision == Precision::Double)
    return train_impl<double>(spec, initial, images, train_set, test_set, config, options);
  return train_impl<float>(spec, initial, images, train_set, test_set, config, options);
}

EvalResult evaluate(const NetSpec &spec, const ParameterStore<float> &params, const ImageBank &images,
                    const std::vector<Example> &examples) {
  check_store(spec, params);
  check_examples(spec, images, examples, "evaluation", false);
  const net::Network<float> network(spec);
  const std::size_t k = spec.num_categories;
  std::vector<float> logits(examples.size() * k);
  std::vector<std::size_t> labels(examples.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 4)
  for (std::size_t i = 0; i < examples.size(); ++i) {
    try {
      const auto out = network.forward_single(params, images[examples[i].left]);
      std::copy(out.values().begin(), out.values().end(), logits.begin() + static_cast<std::ptrdiff_t>(i * k));
      labels[i] = *examples[i].category;
    } catch (...) {
#pragma omp critical
      if (!failure)
        failure = std::current_exception();
    }
  }
  if (failure)
    std::rethrow_exception(failure);
  return score_logits(logits, labels, k);
}

std::vector<Example> k_per_class(const std::vector<Example> &examples, std::size_t k, std::uint64_t seed) {
  if (k == 0)
    throw ConfigError("k per class must be positive");
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (!examples[i].category)
      throw DataError("k-per-class subsetting needs category labels");
    by_class[*examples[i].category].push_back(i);
  }
  std::vector<std::size_t> keep;
  for (auto &[category, idx] : by_class) {
    if (idx.size() < k)
      throw DataError("class " + std::to_string(category) + " has " + std::to_string(idx.size()) +
                      " examples, fewer than k = " + std::to_string(k));
    Rng rng = keyed_rng(seed, {0x6b706300ULL, category});
    shuffle_in_place(idx, rng);
    keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
  }
  std::sort(keep.begin(), keep.end());
  std::vector<Example> out;
  for (auto i : keep)
    out.push_back(examples[i]);
  return out;
}

NetSpec finetune_spec(const NetSpec &source, std::size_t num_categories, std::optional<std::size_t> num_pose_labels) {
  NetSpec spec = source;
  spec.num_categories = num_categories;
  if (num_pose_labels)
    spec.num_pose_labels = *num_pose_labels;
  spec.validate();
  return spec;
}

ParameterStore<float> transfer_parameters(const Checkpoint &source, const NetSpec &target, std::uint64_t seed) {
  target.validate();
  const bool same_pose_space = source.spec.kind == target.kind &&
                               source.spec.num_pose_labels == target.num_pose_labels &&
                               source.params.contains(net::names::pose_weight);
  ParameterStore<float> out;
  out.seed = seed;
  for (const auto &[name, shape] : net::parameter_shapes(target)) {
    const bool pose_head = name == net::names::pose_weight || name == net::names::pose_bias;
    if (net::is_head_parameter(name) && !(pose_head && same_pose_space)) {
      out.add(name, net::init_tensor<float>(target, name, shape, seed));
      continue;
    }
    if (!source.params.contains(name))
      throw ConfigError("checkpoint has no tensor " + name + " needed by the target network");
    const auto &t = source.params.at(name);
    if (t.shape() != shape)
      throw ConfigError("tensor " + name + " is " + to_string(t.shape()) + " in the checkpoint but " +
                        to_string(shape) + " in the target network");
    out.add(name, t);
  }
  return out;
}

TrainResult finetune(const Checkpoint &source, const NetSpec &target, const ImageBank &images,
                     const std::vector<Example> &train_set, const std::vector<Example> &test_set,
                     const TrainConfig &config, std::optional<std::size_t> k, const TrainOptions &options) {
  auto params = transfer_parameters(source, target, config.seed);
  const auto subset = k ? k_per_class(train_set, *k, config.seed) : train_set;
  return train(target, std::move(params), images, subset, test_set, config, options);
}

GradBalanceReport grad_balance_report(const NetSpec &spec, const ParameterStore<float> &params,
                                      const ImageBank &images, const std::vector<Example> &batch) {
  check_store(spec, params);
  if (batch.empty())
    throw DataError("gradient balance needs a non-empty batch");
  check_examples(spec, images, batch, "balance", true);
  for (const auto &e : batch)
    if (!e.right)
      throw DataError("gradient balance needs image pairs");
  const net::Network<float> network(spec);
  const auto &entries = params.entries();
  std::unordered_map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < entries.size(); ++i)
    slot.emplace(entries[i].first, i);
  std::array<std::vector<std::vector<double>>, 3> sums;
  for (auto &s : sums)
    for (const auto &[name, t] : entries)
      s.emplace_back(t.size(), 0.0);

  for (const auto &e : batch) {
    Graph<float> g;
    Rng l(0), r(0);
    NodeId logits = 0;
    const auto nodes = build_example(g, network, params, images, e, net::LossWeights{}, Mode::Eval, l, r, logits);
    const std::array<std::optional<NodeId>, 3> terms{nodes.object, nodes.pose, nodes.tie};
    for (std::size_t t = 0; t < 3; ++t) {
      if (!terms[t])
        continue;
      g.zero_grad();
      g.backward(*terms[t]);
      for (const auto &[name, id] : g.parameters())
        if (const auto *gr = g.grad_if_present(id)) {
          auto &acc = sums[t][slot.at(name)];
          for (std::size_t i = 0; i < acc.size(); ++i)
            acc[i] += (*gr)[i];
        }
    }
  }
  std::array<double, 3> norms{};
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t t = 0; t < 3; ++t) {
    double sq = 0;
    for (const auto &v : sums[t])
      for (double x : v)
        sq += (x * inv) * (x * inv);
    norms[t] = std::sqrt(sq);
  }
  GradBalanceReport r{norms[0], norms[1], norms[2], std::nullopt, std::nullopt};
  if (norms[1] > 0)
    r.suggested_lambda1 = norms[0] / norms[1];
  if (norms[2] > 0)
    r.suggested_lambda2 = norms[0] / norms[2];
  return r;
}

} // namespace disc::harness
