#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "disc/gradcore/tensor.hpp"

namespace disc {

using NodeId = std::size_t;

enum class OpKind {
  Input,
  Parameter,
  Conv2d,
  MaxPool,
  Lrn,
  FullyConnected,
  Relu,
  Dropout,
  Slice,
  Concat,
  SoftmaxCrossEntropy,
  L2Tie,
  WeightedSum,
  Sum,
};

std::string_view op_name(OpKind kind);

/// Tape of operations recorded during one forward evaluation. Nodes are
/// appended in evaluation order, so the node list is already topologically
/// sorted and backward walks it in reverse.
///
/// Parameter nodes do not own their values: they reference tensors held by the
/// caller (normally a ParameterStore), which must outlive the graph. Binding
/// the same name twice returns the existing node, so every use of a weight
/// inside one graph feeds one gradient accumulator.
template <typename T> class Graph {
public:
  using BackwardFn = std::function<void(Graph &, NodeId)>;

  NodeId input(Tensor<T> value);
  NodeId parameter(const std::string &name, const Tensor<T> &storage);
  NodeId add(OpKind kind, std::vector<NodeId> inputs, Tensor<T> value, BackwardFn backward);

  std::size_t size() const noexcept { return nodes_.size(); }
  const Tensor<T> &value(NodeId id) const;
  OpKind kind(NodeId id) const { return nodes_.at(id).kind; }
  const std::vector<NodeId> &inputs(NodeId id) const { return nodes_.at(id).inputs; }
  bool requires_grad(NodeId id) const { return nodes_.at(id).requires_grad; }

  /// Gradient buffer of a node, allocated as zeros on first access.
  Tensor<T> &grad(NodeId id);
  const Tensor<T> *grad_if_present(NodeId id) const;

  /// Reverse-mode pass from a single-element node. Parameter gradients
  /// accumulate across calls until zero_grad(); intermediate gradients are
  /// reset at the start of every pass.
  void backward(NodeId loss);
  void zero_grad();

  const std::vector<std::pair<std::string, NodeId>> &parameters() const noexcept { return params_; }
  std::optional<NodeId> find_parameter(std::string_view name) const;

  /// Accumulated gradient of a bound parameter; zeros when the parameter
  /// never received gradient. Throws when the name was never bound.
  Tensor<T> parameter_grad(std::string_view name) const;

private:
  struct Node {
    OpKind kind = OpKind::Input;
    std::vector<NodeId> inputs;
    Tensor<T> value;
    const Tensor<T> *external = nullptr;
    Tensor<T> grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::vector<std::pair<std::string, NodeId>> params_;
};

extern template class Graph<float>;
extern template class Graph<double>;

} // namespace disc
