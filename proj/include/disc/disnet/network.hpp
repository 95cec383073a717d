#pragma once

#include <optional>
#include <span>
#include <vector>

#include "disc/disnet/netspec.hpp"
#include "disc/disnet/params.hpp"
#include "disc/gradcore/graph.hpp"
#include "disc/gradcore/ops.hpp"
#include "disc/gradcore/rng.hpp"

namespace disc::net {

enum class EmbeddingSpace { Identity, Pose, Full };

struct StreamNodes {
  NodeId embedding = 0;
  /// Identity half; the whole embedding for the baseline.
  NodeId identity = 0;
  std::optional<NodeId> pose;
  /// Identity half before the final dropout. The tie loss reads this, since
  /// the two streams draw independent dropout masks.
  NodeId tie_identity = 0;
};

struct SingleNodes {
  StreamNodes stream;
  NodeId category_logits = 0;
};

struct PairNodes {
  StreamNodes left;
  StreamNodes right;
  NodeId category_logits = 0;
  std::optional<NodeId> pose_logits;
};

template <typename T> struct EmbeddingPair {
  Tensor<T> id1, id2;
  Tensor<T> pose1, pose2;
};

template <typename T> struct PairOutputs {
  Tensor<T> category_logits;
  Tensor<T> pose_logits;
  EmbeddingPair<T> embeddings;
};

/// Graph construction for the single-stream baseline and the two-stream
/// disentangling network. The network itself holds no weights: every build
/// binds the tensors of the ParameterStore it is given, so both streams of a
/// pair read the same store.
template <typename T> class Network {
public:
  explicit Network(NetSpec spec);

  const NetSpec &spec() const noexcept { return spec_; }

  /// One stream up to the final embedding (after its ReLU/dropout).
  StreamNodes stream(Graph<T> &g, const ParameterStore<T> &params, NodeId image, Mode mode, Rng &rng) const;

  SingleNodes build_single(Graph<T> &g, const ParameterStore<T> &params, const Tensor<T> &image, Mode mode,
                           Rng &rng) const;

  /// Dropout masks come from separate streams per image.
  PairNodes build_pair(Graph<T> &g, const ParameterStore<T> &params, const Tensor<T> &left,
                       const Tensor<T> &right, Mode mode, Rng &left_rng, Rng &right_rng) const;

  /// Eval-mode category logits from the identity half of one stream.
  Tensor<T> forward_single(const ParameterStore<T> &params, const Tensor<T> &image) const;

  /// Eval-mode pair outputs.
  PairOutputs<T> forward_pair(const ParameterStore<T> &params, const Tensor<T> &left, const Tensor<T> &right) const;

  /// Eval-mode slice of the final embedding.
  Tensor<T> extract_embedding(const ParameterStore<T> &params, const Tensor<T> &image, EmbeddingSpace space) const;

  /// Category head applied to a full embedding vector; reads only the
  /// identity units.
  Tensor<T> category_head(const ParameterStore<T> &params, const Tensor<T> &embedding) const;

private:
  void check_image(const Tensor<T> &image) const;
  NodeId head(Graph<T> &g, const ParameterStore<T> &params, NodeId identity) const;

  NetSpec spec_;
};

extern template class Network<float>;
extern template class Network<double>;

} // namespace disc::net
