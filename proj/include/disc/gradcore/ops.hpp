#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "disc/gradcore/graph.hpp"
#include "disc/gradcore/rng.hpp"

// Differentiable layer primitives. Each function evaluates its forward value
// immediately, appends a node to the graph and registers the backward rule.
// Contract violations (shape mismatch, bad hyper-parameters) throw
// std::invalid_argument.

namespace disc {

enum class Mode { Train, Eval };

struct LrnParams {
  std::size_t depth = 5;
  double k = 2.0;
  double alpha = 1e-4;
  double beta = 0.75;

  friend bool operator==(const LrnParams &, const LrnParams &) = default;
};

/// Cross-correlation (no kernel flip). input [C_in,H,W], kernels
/// [C_out,C_in,kH,kW], bias [C_out].
template <typename T>
NodeId conv2d(Graph<T> &g, NodeId input, NodeId kernels, NodeId bias, std::size_t stride, std::size_t pad);

/// Per-window maximum; the gradient goes to the first maximum in scan order.
template <typename T> NodeId maxpool(Graph<T> &g, NodeId input, std::size_t window, std::size_t stride);

/// Across-channel local response normalization:
///   out[c] = in[c] / (k + alpha * sum_{c' in window(c)} in[c']^2)^beta
/// with the window of `depth` channels centred on c and clipped at the ends.
template <typename T> NodeId lrn(Graph<T> &g, NodeId input, const LrnParams &params);

/// out = W x + b. The input is flattened, so a [C,H,W] activation can feed it.
template <typename T> NodeId fully_connected(Graph<T> &g, NodeId input, NodeId weights, NodeId bias);

template <typename T> NodeId relu(Graph<T> &g, NodeId input);

/// Inverted dropout: in Train mode each element is zeroed with probability
/// `rate` and survivors are scaled by 1/(1-rate); Eval mode is the identity.
template <typename T> NodeId dropout(Graph<T> &g, NodeId input, double rate, Mode mode, Rng &rng);

/// Elements [offset, offset+length) of the flattened input.
template <typename T> NodeId slice(Graph<T> &g, NodeId input, std::size_t offset, std::size_t length);

template <typename T> NodeId concat(Graph<T> &g, NodeId first, NodeId second);

/// -log softmax(logits)[label], evaluated with max subtraction.
template <typename T> NodeId softmax_cross_entropy(Graph<T> &g, NodeId logits, std::size_t label);

/// Euclidean distance ||a - b||; with `squared` set, ||a - b||^2.
/// The norm's gradient is (a-b)/max(||a-b||, 1e-12).
template <typename T> NodeId l2_tie_loss(Graph<T> &g, NodeId a, NodeId b, bool squared = false);

/// sum_i w_i * s_i over single-element nodes.
template <typename T> NodeId weighted_sum(Graph<T> &g, const std::vector<std::pair<NodeId, double>> &terms);

/// Sum of all elements.
template <typename T> NodeId sum(Graph<T> &g, NodeId input);

/// Numerically stable softmax of a logit vector.
template <typename T> std::vector<T> softmax(std::span<const T> logits);

} // namespace disc
