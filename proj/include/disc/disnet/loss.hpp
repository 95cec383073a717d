#pragma once

#include <array>
#include <cstddef>
#include <optional>

#include "disc/disnet/network.hpp"

namespace disc::net {

struct LossWeights {
  double lambda1 = 1.0; ///< pose-transformation term
  double lambda2 = 0.1; ///< identity tie term

  void validate() const;
};

struct Labels {
  std::optional<std::size_t> category;
  std::optional<std::size_t> pose;
};

/// Loss nodes of one example. Absent terms have no node at all, so they add
/// nothing to the total and send no gradient anywhere.
struct LossNodes {
  std::optional<NodeId> object;
  std::optional<NodeId> pose;
  std::optional<NodeId> tie;
  NodeId total = 0;
};

struct LossBreakdown {
  double object_loss = 0.0;
  double pose_loss = 0.0;
  double tie_loss = 0.0;
  double total = 0.0;
  /// ||d term / d theta|| for object, pose and tie, filled by diagnostics.
  std::array<double, 3> term_gradient_norm{};
};

/// Single image: the object term alone. Requires a category label; a pose
/// label on a single image is rejected.
template <typename T> LossNodes composite_loss(Graph<T> &g, const SingleNodes &nodes, const Labels &labels);

/// Image pair: L = L(object) + lambda1 L(pose) + lambda2 ||id1 - id2||.
/// The object and pose terms are present only when their label is.
template <typename T>
LossNodes composite_loss(Graph<T> &g, const PairNodes &nodes, const Labels &labels, const LossWeights &weights,
                         TieLossForm tie_form);

template <typename T> LossBreakdown breakdown(const Graph<T> &g, const LossNodes &nodes);

} // namespace disc::net
