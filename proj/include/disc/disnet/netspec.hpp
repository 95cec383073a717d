#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "disc/common/ini.hpp"
#include "disc/gradcore/ops.hpp"

namespace disc::net {

enum class LayerKind { Conv, Pool, Lrn, Fc, Dropout };

/// One token of the layer string. Tokens:
///   C<n>[k<kernel>][s<stride>][p<pad>]   convolution + ReLU (defaults k3 s1 p0)
///   P[<window>][s<stride>]                max pooling (defaults 2, stride = window)
///   LRN                                   local response normalization
///   F<n>                                  fully connected + ReLU
///   D                                     dropout
struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  std::size_t units = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t pad = 0;

  friend bool operator==(const LayerSpec &, const LayerSpec &) = default;
};

std::vector<LayerSpec> parse_layers(const std::string &text);
std::string format_layers(const std::vector<LayerSpec> &layers);

enum class ModelKind {
  /// Two weight-shared streams, embedding split into identity and pose.
  Disentangled,
  /// Single stream, whole embedding feeds the category head.
  Baseline,
};

enum class TieLossForm { Norm, SquaredNorm };

/// Which stream's identity half feeds the category head of a pair.
enum class CategoryStream { Left, Right };

struct NetSpec {
  ModelKind kind = ModelKind::Disentangled;
  std::vector<LayerSpec> layers;
  std::array<std::size_t, 3> input_shape{3, 32, 32};
  std::size_t identity_units = 0;
  std::size_t pose_units = 0;
  std::size_t num_categories = 0;
  std::size_t num_pose_labels = 0;
  LrnParams lrn{};
  double dropout_rate = 0.5;
  /// Std of the Gaussian weight init; 0 selects fan-in scaling sqrt(2/fan_in).
  double init_std = 0.01;
  TieLossForm tie_form = TieLossForm::Norm;
  CategoryStream category_stream = CategoryStream::Left;

  /// Units of the final fully connected layer.
  std::size_t embedding_size() const;
  /// Inputs of the category head: identity units, or the whole embedding for
  /// the baseline.
  std::size_t category_inputs() const;

  /// Throws ConfigError on violated invariants or inconsistent geometry,
  /// naming the offending layer.
  void validate() const;

  friend bool operator==(const NetSpec &, const NetSpec &) = default;
};

/// Activation shape after each layer; validates geometry along the way.
std::vector<std::array<std::size_t, 3>> trace_shapes(const NetSpec &spec);

/// 227x227 AlexNet-style topology with 1024-unit fc layers split 512/512.
NetSpec paper_preset(std::size_t num_categories, std::size_t num_pose_labels);

/// C16-P-LRN-C32-P-C32-F128-D-F128-D on 3x32x32, embedding split 64/64.
NetSpec desk_preset(std::size_t num_categories, std::size_t num_pose_labels);

/// Same stream as `spec` with an undivided embedding.
NetSpec as_baseline(NetSpec spec);

/// Replaces the size of the final fully connected layer.
NetSpec with_embedding_size(NetSpec spec, std::size_t units);

void write_netspec(const NetSpec &spec, IniDocument &doc, const std::string &section = "model");
NetSpec read_netspec(const IniDocument &doc, const std::string &section = "model");
std::string netspec_to_text(const NetSpec &spec);
NetSpec netspec_from_text(const std::string &text);

} // namespace disc::net
