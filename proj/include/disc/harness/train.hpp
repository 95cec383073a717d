#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "disc/disnet/loss.hpp"
#include "disc/harness/checkpoint.hpp"
#include "disc/harness/metrics.hpp"
#include "disc/pairgen/pairs.hpp"

namespace disc::harness {

/// exp(ln a + e / (E - 1) * (ln b - ln a)); lr_start when E = 1.
double lr_at(std::size_t epoch, std::size_t epochs, double lr_start, double lr_end);

enum class Precision { Float, Double };

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  double lr_start = 0.01;
  double lr_end = 0.0001;
  double momentum = 0.0;
  double weight_decay = 0.0;
  net::LossWeights loss_weights;
  std::uint64_t seed = 1;
  Precision precision = Precision::Float;
  /// Examples visited per epoch, taken from the front of that epoch's
  /// permutation; 0 visits all.
  std::size_t examples_per_epoch = 0;

  void validate() const;
  /// Canonical text used for the checkpoint digest.
  std::string to_text() const;
};

/// One training or test example. `right` is set for pairs; images are
/// indices into the image bank passed alongside.
struct Example {
  std::size_t left = 0;
  std::optional<std::size_t> right;
  std::optional<std::size_t> category;
  std::optional<std::size_t> pose;

  friend bool operator==(const Example &, const Example &) = default;
};

std::vector<Example> pair_examples(const std::vector<pairs::PairedExample> &pairs, bool with_category = true);
std::vector<Example> single_examples(const std::vector<pairs::SingleExample> &singles);
/// Every shot of the given instances as a single-image example.
std::vector<Example> shot_examples(const std::vector<pairs::Shot> &shots, const std::set<int> &instances);

using ImageBank = std::vector<Tensor<float>>;

/// Zero mean and unit standard deviation over all values of one image; a
/// constant image maps to zeros.
Tensor<float> standardize_image(const Tensor<float> &image);
/// Networks are trained and evaluated on standardized images.
ImageBank standardized_bank(const std::vector<Tensor<float>> &images);

struct TrainOptions {
  /// When set, epoch_NNN.ckpt is written after every epoch.
  std::optional<std::filesystem::path> checkpoint_dir;
  std::function<void(const EpochMetrics &)> on_epoch;
  /// Record the example index of every step, in order.
  bool record_trace = false;
  /// Evaluate on the test examples every this many epochs (and after the
  /// last); 0 disables.
  std::size_t eval_every = 1;
};

struct TrainResult {
  Checkpoint checkpoint;
  MetricLog log;
  std::vector<std::size_t> trace;
};

/// Minibatch SGD on the mean batch loss. Per-example gradients are summed in
/// example order, so results do not depend on the thread count. Throws
/// NumericalError when a batch loss is non-finite or above 1e6; checkpoints of
/// completed epochs stay on disk.
TrainResult train(const net::NetSpec &spec, net::ParameterStore<float> initial, const ImageBank &images,
                  const std::vector<Example> &train_set, const std::vector<Example> &test_set,
                  const TrainConfig &config, const TrainOptions &options = {});

/// Eval-mode single-stream classification.
EvalResult evaluate(const net::NetSpec &spec, const net::ParameterStore<float> &params, const ImageBank &images,
                    const std::vector<Example> &examples);

/// Exactly k examples per category, chosen with a generator keyed by seed and
/// returned in their original order. Throws DataError when a class has fewer.
std::vector<Example> k_per_class(const std::vector<Example> &examples, std::size_t k, std::uint64_t seed);

/// Target network for fine-tuning: the source description with new head sizes.
net::NetSpec finetune_spec(const net::NetSpec &source, std::size_t num_categories,
                           std::optional<std::size_t> num_pose_labels = std::nullopt);

/// Copies every backbone tensor from the checkpoint and draws fresh heads
/// (the pose head is kept when its label space is unchanged). Throws
/// ConfigError naming the first tensor whose shape does not match.
net::ParameterStore<float> transfer_parameters(const Checkpoint &source, const net::NetSpec &target,
                                               std::uint64_t seed);

TrainResult finetune(const Checkpoint &source, const net::NetSpec &target, const ImageBank &images,
                     const std::vector<Example> &train_set, const std::vector<Example> &test_set,
                     const TrainConfig &config, std::optional<std::size_t> k = std::nullopt,
                     const TrainOptions &options = {});

struct GradBalanceReport {
  double object_norm = 0.0;
  double pose_norm = 0.0;
  double tie_norm = 0.0;
  /// lambda values that would scale each term's gradient norm to the object
  /// term's; empty when that term's gradient is zero.
  std::optional<double> suggested_lambda1;
  std::optional<double> suggested_lambda2;
};

/// Norms of the gradient of each batch-mean loss term with respect to all
/// parameters, in eval mode. Diagnostic only.
GradBalanceReport grad_balance_report(const net::NetSpec &spec, const net::ParameterStore<float> &params,
                                      const ImageBank &images, const std::vector<Example> &batch);

} // namespace disc::harness
