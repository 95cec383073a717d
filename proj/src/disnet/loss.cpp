#include "disc/disnet/loss.hpp"

#include <stdexcept>
#include <string>

#include "disc/gradcore/ops.hpp"

namespace disc::net {

void LossWeights::validate() const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0))
    throw std::invalid_argument("loss weights must be non-negative");
}

template <typename T> LossNodes composite_loss(Graph<T> &g, const SingleNodes &nodes, const Labels &labels) {
  if (!labels.category)
    throw std::invalid_argument("a single image needs a category label");
  if (labels.pose)
    throw std::invalid_argument("a single image cannot carry a pose-transformation label");
  LossNodes out;
  out.object = softmax_cross_entropy(g, nodes.category_logits, *labels.category);
  out.total = *out.object;
  return out;
}

template <typename T>
LossNodes composite_loss(Graph<T> &g, const PairNodes &nodes, const Labels &labels, const LossWeights &weights,
                         TieLossForm tie_form) {
  weights.validate();
  LossNodes out;
  std::vector<std::pair<NodeId, double>> terms;
  if (labels.category) {
    out.object = softmax_cross_entropy(g, nodes.category_logits, *labels.category);
    terms.emplace_back(*out.object, 1.0);
  }
  if (labels.pose) {
    if (!nodes.pose_logits)
      throw std::invalid_argument("pose label " + std::to_string(*labels.pose) +
                                  " given but the network has no pose head");
    out.pose = softmax_cross_entropy(g, *nodes.pose_logits, *labels.pose);
    terms.emplace_back(*out.pose, weights.lambda1);
  }
  out.tie = l2_tie_loss(g, nodes.left.tie_identity, nodes.right.tie_identity, tie_form == TieLossForm::SquaredNorm);
  terms.emplace_back(*out.tie, weights.lambda2);
  out.total = weighted_sum(g, terms);
  return out;
}

template <typename T> LossBreakdown breakdown(const Graph<T> &g, const LossNodes &nodes) {
  LossBreakdown b;
  if (nodes.object)
    b.object_loss = static_cast<double>(g.value(*nodes.object)[0]);
  if (nodes.pose)
    b.pose_loss = static_cast<double>(g.value(*nodes.pose)[0]);
  if (nodes.tie)
    b.tie_loss = static_cast<double>(g.value(*nodes.tie)[0]);
  b.total = static_cast<double>(g.value(nodes.total)[0]);
  return b;
}

#define DISC_INSTANTIATE(T)                                                                        \
  template LossNodes composite_loss<T>(Graph<T> &, const SingleNodes &, const Labels &);           \
  template LossNodes composite_loss<T>(Graph<T> &, const PairNodes &, const Labels &,              \
                                       const LossWeights &, TieLossForm);                          \
  template LossBreakdown breakdown<T>(const Graph<T> &, const LossNodes &);

DISC_INSTANTIATE(float)
DISC_INSTANTIATE(double)
#undef DISC_INSTANTIATE

} // namespace disc::net
