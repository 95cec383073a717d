#include "disc/gradcore/graph.hpp"

#include <stdexcept>

namespace disc {

std::string_view op_name(OpKind kind) {
  switch (kind) {
  case OpKind::Input: return "input";
  case OpKind::Parameter: return "parameter";
  case OpKind::Conv2d: return "conv2d";
  case OpKind::MaxPool: return "maxpool";
  case OpKind::Lrn: return "lrn";
  case OpKind::FullyConnected: return "fully_connected";
  case OpKind::Relu: return "relu";
  case OpKind::Dropout: return "dropout";
  case OpKind::Slice: return "slice";
  case OpKind::Concat: return "concat";
  case OpKind::SoftmaxCrossEntropy: return "softmax_cross_entropy";
  case OpKind::L2Tie: return "l2_tie";
  case OpKind::WeightedSum: return "weighted_sum";
  case OpKind::Sum: return "sum";
  }
  return "unknown";
}

template <typename T> NodeId Graph<T>::input(Tensor<T> value) {
  Node node;
  node.kind = OpKind::Input;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

template <typename T> NodeId Graph<T>::parameter(const std::string &name, const Tensor<T> &storage) {
  if (auto existing = find_parameter(name)) {
    if (nodes_[*existing].external != &storage)
      throw std::invalid_argument("parameter '" + name + "' already bound to different storage");
    return *existing;
  }
  Node node;
  node.kind = OpKind::Parameter;
  node.external = &storage;
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  params_.emplace_back(name, nodes_.size() - 1);
  return nodes_.size() - 1;
}

template <typename T>
NodeId Graph<T>::add(OpKind kind, std::vector<NodeId> inputs, Tensor<T> value, BackwardFn backward) {
  Node node;
  node.kind = kind;
  for (auto in : inputs) {
    if (in >= nodes_.size())
      throw std::logic_error("graph input refers to a node that does not exist yet");
    node.requires_grad = node.requires_grad || nodes_[in].requires_grad;
  }
  node.inputs = std::move(inputs);
  node.value = std::move(value);
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

template <typename T> const Tensor<T> &Graph<T>::value(NodeId id) const {
  const Node &node = nodes_.at(id);
  return node.external ? *node.external : node.value;
}

template <typename T> Tensor<T> &Graph<T>::grad(NodeId id) {
  Node &node = nodes_.at(id);
  if (!node.has_grad) {
    node.grad = Tensor<T>(value(id).shape());
    node.has_grad = true;
  }
  return node.grad;
}

template <typename T> const Tensor<T> *Graph<T>::grad_if_present(NodeId id) const {
  const Node &node = nodes_.at(id);
  return node.has_grad ? &node.grad : nullptr;
}

template <typename T> void Graph<T>::backward(NodeId loss) {
  if (value(loss).size() != 1)
    throw std::invalid_argument("backward needs a scalar loss, node has shape " +
                                to_string(value(loss).shape()));
  for (auto &node : nodes_)
    if (node.kind != OpKind::Parameter && node.has_grad) {
      node.grad = Tensor<T>();
      node.has_grad = false;
    }
  grad(loss)[0] += T{1};
  for (NodeId id = loss + 1; id-- > 0;) {
    Node &node = nodes_[id];
    if (!node.has_grad || !node.backward || !node.requires_grad)
      continue;
    node.backward(*this, id);
  }
}

template <typename T> void Graph<T>::zero_grad() {
  for (auto &node : nodes_) {
    node.grad = Tensor<T>();
    node.has_grad = false;
  }
}

template <typename T> std::optional<NodeId> Graph<T>::find_parameter(std::string_view name) const {
  for (const auto &[n, id] : params_)
    if (n == name)
      return id;
  return std::nullopt;
}

template <typename T> Tensor<T> Graph<T>::parameter_grad(std::string_view name) const {
  auto id = find_parameter(name);
  if (!id)
    throw std::invalid_argument("parameter '" + std::string(name) + "' is not bound in this graph");
  if (const auto *g = grad_if_present(*id))
    return *g;
  return Tensor<T>(value(*id).shape());
}

template class Graph<float>;
template class Graph<double>;

} // namespace disc
