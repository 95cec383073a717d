#include "disc/disnet/network.hpp"

#include <stdexcept>

namespace disc::net {

template <typename T> Network<T>::Network(NetSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

template <typename T> void Network<T>::check_image(const Tensor<T> &image) const {
  const Shape expected{spec_.input_shape[0], spec_.input_shape[1], spec_.input_shape[2]};
  if (image.shape() != expected)
    throw std::invalid_argument("image shape " + to_string(image.shape()) + " does not match network input " +
                                to_string(expected));
}

template <typename T>
StreamNodes Network<T>::stream(Graph<T> &g, const ParameterStore<T> &params, NodeId image, Mode mode,
                               Rng &rng) const {
  NodeId x = image;
  NodeId features = image;
  std::size_t conv = 0, fc = 0;
  for (const auto &l : spec_.layers) {
    switch (l.kind) {
    case LayerKind::Conv:
      ++conv;
      x = conv2d(g, x, g.parameter(names::conv_weight(conv), params.at(names::conv_weight(conv))),
                 g.parameter(names::conv_bias(conv), params.at(names::conv_bias(conv))), l.stride, l.pad);
      x = relu(g, x);
      break;
    case LayerKind::Pool: x = maxpool(g, x, l.kernel, l.stride); break;
    case LayerKind::Lrn: x = lrn(g, x, spec_.lrn); break;
    case LayerKind::Fc:
      ++fc;
      x = fully_connected(g, x, g.parameter(names::fc_weight(fc), params.at(names::fc_weight(fc))),
                          g.parameter(names::fc_bias(fc), params.at(names::fc_bias(fc))));
      x = relu(g, x);
      features = x;
      break;
    case LayerKind::Dropout: x = dropout(g, x, spec_.dropout_rate, mode, rng); break;
    }
  }
  StreamNodes out;
  out.embedding = x;
  if (spec_.kind == ModelKind::Baseline) {
    out.identity = x;
    out.tie_identity = features;
  } else {
    out.identity = slice(g, x, 0, spec_.identity_units);
    out.pose = slice(g, x, spec_.identity_units, spec_.pose_units);
    out.tie_identity = features == x ? out.identity : slice(g, features, 0, spec_.identity_units);
  }
  return out;
}

template <typename T> NodeId Network<T>::head(Graph<T> &g, const ParameterStore<T> &params, NodeId identity) const {
  return fully_connected(g, identity, g.parameter(names::category_weight, params.at(names::category_weight)),
                         g.parameter(names::category_bias, params.at(names::category_bias)));
}

template <typename T>
SingleNodes Network<T>::build_single(Graph<T> &g, const ParameterStore<T> &params, const Tensor<T> &image,
                                     Mode mode, Rng &rng) const {
  check_image(image);
  SingleNodes out;
  out.stream = stream(g, params, g.input(image), mode, rng);
  out.category_logits = head(g, params, out.stream.identity);
  return out;
}

template <typename T>
PairNodes Network<T>::build_pair(Graph<T> &g, const ParameterStore<T> &params, const Tensor<T> &left,
                                 const Tensor<T> &right, Mode mode, Rng &left_rng, Rng &right_rng) const {
  if (spec_.kind != ModelKind::Disentangled)
    throw std::logic_error("the baseline network has no pair path");
  check_image(left);
  check_image(right);
  PairNodes out;
  out.left = stream(g, params, g.input(left), mode, left_rng);
  out.right = stream(g, params, g.input(right), mode, right_rng);
  const auto &fed = spec_.category_stream == CategoryStream::Left ? out.left : out.right;
  out.category_logits = head(g, params, fed.identity);
  if (spec_.num_pose_labels > 0) {
    const NodeId fused = concat(g, *out.left.pose, *out.right.pose);
    out.pose_logits = fully_connected(g, fused, g.parameter(names::pose_weight, params.at(names::pose_weight)),
                                      g.parameter(names::pose_bias, params.at(names::pose_bias)));
  }
  return out;
}

template <typename T>
Tensor<T> Network<T>::forward_single(const ParameterStore<T> &params, const Tensor<T> &image) const {
  Graph<T> g;
  Rng unused(0);
  const auto nodes = build_single(g, params, image, Mode::Eval, unused);
  return g.value(nodes.category_logits);
}

template <typename T>
PairOutputs<T> Network<T>::forward_pair(const ParameterStore<T> &params, const Tensor<T> &left,
                                        const Tensor<T> &right) const {
  Graph<T> g;
  Rng unused_left(0), unused_right(0);
  const auto nodes = build_pair(g, params, left, right, Mode::Eval, unused_left, unused_right);
  PairOutputs<T> out;
  out.category_logits = g.value(nodes.category_logits);
  if (nodes.pose_logits)
    out.pose_logits = g.value(*nodes.pose_logits);
  out.embeddings.id1 = g.value(nodes.left.identity);
  out.embeddings.id2 = g.value(nodes.right.identity);
  out.embeddings.pose1 = g.value(*nodes.left.pose);
  out.embeddings.pose2 = g.value(*nodes.right.pose);
  return out;
}

template <typename T>
Tensor<T> Network<T>::extract_embedding(const ParameterStore<T> &params, const Tensor<T> &image,
                                        EmbeddingSpace space) const {
  check_image(image);
  Graph<T> g;
  Rng unused(0);
  const auto nodes = stream(g, params, g.input(image), Mode::Eval, unused);
  switch (space) {
  case EmbeddingSpace::Full: return g.value(nodes.embedding);
  case EmbeddingSpace::Identity: return g.value(nodes.identity);
  case EmbeddingSpace::Pose:
    if (!nodes.pose)
      throw std::invalid_argument("the baseline embedding has no pose units");
    return g.value(*nodes.pose);
  }
  return {};
}

template <typename T>
Tensor<T> Network<T>::category_head(const ParameterStore<T> &params, const Tensor<T> &embedding) const {
  if (embedding.size() != spec_.embedding_size())
    throw std::invalid_argument("embedding has " + std::to_string(embedding.size()) + " units, expected " +
                                std::to_string(spec_.embedding_size()));
  Graph<T> g;
  NodeId e = g.input(embedding);
  NodeId identity = spec_.kind == ModelKind::Baseline ? e : slice(g, e, 0, spec_.identity_units);
  return g.value(head(g, params, identity));
}

template class Network<float>;
template class Network<double>;

} // namespace disc::net
