#include "disc/gradcore/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "disc/gradcore/kernels.hpp"

namespace disc {
namespace {

void require(bool cond, const std::string &message) {
  if (!cond)
    throw std::invalid_argument(message);
}

} // namespace

template <typename T>
NodeId conv2d(Graph<T> &g, NodeId input, NodeId kernels, NodeId bias, std::size_t stride, std::size_t pad) {
  const auto &x = g.value(input);
  const auto &w = g.value(kernels);
  const auto &b = g.value(bias);
  require(x.rank() == 3, "conv2d: input must be [C,H,W], got " + to_string(x.shape()));
  require(w.rank() == 4, "conv2d: kernels must be [C_out,C_in,kH,kW], got " + to_string(w.shape()));
  require(w.dim(1) == x.dim(0), "conv2d: kernel expects " + std::to_string(w.dim(1)) +
                                    " input channels but input has " + std::to_string(x.dim(0)));
  require(b.rank() == 1 && b.dim(0) == w.dim(0),
          "conv2d: bias must have " + std::to_string(w.dim(0)) + " entries, got " + to_string(b.shape()));
  require(stride > 0, "conv2d: stride must be positive");
  require(x.dim(1) + 2 * pad >= w.dim(2) && x.dim(2) + 2 * pad >= w.dim(3),
          "conv2d: kernel " + to_string(w.shape()) + " larger than padded input " + to_string(x.shape()));

  kernels::ConvGeometry geo{x.dim(0), x.dim(1), x.dim(2), w.dim(0), w.dim(2), w.dim(3), stride, pad};
  Tensor<T> out(Shape{geo.out_channels, geo.out_h(), geo.out_w()});
  kernels::parallel::conv2d_forward<T>(geo, x.values(), w.values(), b.values(), out.values());

  return g.add(OpKind::Conv2d, {input, kernels, bias}, std::move(out), [geo](Graph<T> &gr, NodeId self) {
    const auto &ins = gr.inputs(self);
    const auto &gout = gr.grad(self);
    std::span<T> gin, gw, gb;
    if (gr.requires_grad(ins[0]))
      gin = gr.grad(ins[0]).values();
    if (gr.requires_grad(ins[1]))
      gw = gr.grad(ins[1]).values();
    if (gr.requires_grad(ins[2]))
      gb = gr.grad(ins[2]).values();
    kernels::parallel::conv2d_backward<T>(geo, gr.value(ins[0]).values(), gr.value(ins[1]).values(),
                                          gout.values(), gin, gw, gb);
  });
}

template <typename T> NodeId maxpool(Graph<T> &g, NodeId input, std::size_t window, std::size_t stride) {
  const auto &x = g.value(input);
  require(window > 0 && stride > 0, "maxpool: window and stride must be positive");
  require(x.rank() == 3, "maxpool: input must be [C,H,W], got " + to_string(x.shape()));
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  require(window <= h && window <= w,
          "maxpool: window " + std::to_string(window) + " exceeds input " + to_string(x.shape()));
  const std::size_t oh = (h - window) / stride + 1, ow = (w - window) / stride + 1;
  Tensor<T> out(Shape{c, oh, ow});
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xo = 0; xo < ow; ++xo) {
        std::size_t best = (ch * h + y * stride) * w + xo * stride;
        for (std::size_t ky = 0; ky < window; ++ky)
          for (std::size_t kx = 0; kx < window; ++kx) {
            const std::size_t idx = (ch * h + y * stride + ky) * w + xo * stride + kx;
            if (x[idx] > x[best])
              best = idx;
          }
        const std::size_t o = (ch * oh + y) * ow + xo;
        out[o] = x[best];
        argmax[o] = best;
      }
  return g.add(OpKind::MaxPool, {input}, std::move(out),
               [argmax = std::move(argmax)](Graph<T> &gr, NodeId self) {
                 const NodeId in = gr.inputs(self)[0];
                 const auto &gout = gr.grad(self);
                 auto &gin = gr.grad(in);
                 for (std::size_t o = 0; o < argmax.size(); ++o)
                   gin[argmax[o]] += gout[o];
               });
}

template <typename T> NodeId lrn(Graph<T> &g, NodeId input, const LrnParams &p) {
  const auto &x = g.value(input);
  require(p.depth >= 1, "lrn: depth must be at least 1");
  require(p.k > 0, "lrn: k must be positive");
  require(x.rank() == 3, "lrn: input must be [C,H,W], got " + to_string(x.shape()));
  const std::size_t c = x.dim(0), plane = x.dim(1) * x.dim(2);
  const std::size_t lo = (p.depth - 1) / 2, hi = p.depth - 1 - lo;
  const T k = static_cast<T>(p.k), alpha = static_cast<T>(p.alpha), beta = static_cast<T>(p.beta);

  Tensor<T> out(x.shape());
  std::vector<T> denom(x.size()); // k + alpha * window sum of squares
  for (std::size_t ch = 0; ch < c; ++ch) {
    const std::size_t first = ch >= lo ? ch - lo : 0, last = std::min(c - 1, ch + hi);
    for (std::size_t i = 0; i < plane; ++i) {
      T acc = T{0};
      for (std::size_t cc = first; cc <= last; ++cc)
        acc += x[cc * plane + i] * x[cc * plane + i];
      const std::size_t idx = ch * plane + i;
      denom[idx] = k + alpha * acc;
      out[idx] = x[idx] / std::pow(denom[idx], beta);
    }
  }
  return g.add(OpKind::Lrn, {input}, std::move(out),
               [denom = std::move(denom), c, plane, lo, hi, alpha, beta](Graph<T> &gr, NodeId self) {
                 const NodeId in = gr.inputs(self)[0];
                 const auto &xv = gr.value(in);
                 const auto &gout = gr.grad(self);
                 auto &gin = gr.grad(in);
                 // term[c] = gout[c] * x[c] * denom[c]^(-beta-1)
                 std::vector<T> term(xv.size());
                 for (std::size_t i = 0; i < xv.size(); ++i)
                   term[i] = gout[i] * xv[i] * std::pow(denom[i], -beta - T{1});
                 for (std::size_t j = 0; j < c; ++j) {
                   // channels whose window contains j
                   const std::size_t first = j >= hi ? j - hi : 0, last = std::min(c - 1, j + lo);
                   for (std::size_t i = 0; i < plane; ++i) {
                     const std::size_t idx = j * plane + i;
                     T cross = T{0};
                     for (std::size_t cc = first; cc <= last; ++cc)
                       cross += term[cc * plane + i];
                     gin[idx] += gout[idx] * std::pow(denom[idx], -beta) -
                                 T{2} * alpha * beta * xv[idx] * cross;
                   }
                 }
               });
}

template <typename T> NodeId fully_connected(Graph<T> &g, NodeId input, NodeId weights, NodeId bias) {
  const auto &x = g.value(input);
  const auto &w = g.value(weights);
  const auto &b = g.value(bias);
  require(w.rank() == 2, "fully_connected: weights must be [m,n], got " + to_string(w.shape()));
  const std::size_t m = w.dim(0), n = w.dim(1);
  require(x.size() == n, "fully_connected: weights expect " + std::to_string(n) + " inputs, got " +
                             std::to_string(x.size()));
  require(b.size() == m, "fully_connected: bias must have " + std::to_string(m) + " entries, got " +
                             std::to_string(b.size()));
  Tensor<T> out(Shape{m});
  kernels::parallel::fc_forward<T>(m, n, x.values(), w.values(), b.values(), out.values());
  return g.add(OpKind::FullyConnected, {input, weights, bias}, std::move(out),
               [m, n](Graph<T> &gr, NodeId self) {
                 const auto &ins = gr.inputs(self);
                 std::span<T> gx, gw, gb;
                 if (gr.requires_grad(ins[0]))
                   gx = gr.grad(ins[0]).values();
                 if (gr.requires_grad(ins[1]))
                   gw = gr.grad(ins[1]).values();
                 if (gr.requires_grad(ins[2]))
                   gb = gr.grad(ins[2]).values();
                 kernels::parallel::fc_backward<T>(m, n, gr.value(ins[0]).values(), gr.value(ins[1]).values(),
                                                   gr.grad(self).values(), gx, gw, gb);
               });
}

template <typename T> NodeId relu(Graph<T> &g, NodeId input) {
  const auto &x = g.value(input);
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = x[i] > T{0} ? x[i] : T{0};
  return g.add(OpKind::Relu, {input}, std::move(out), [](Graph<T> &gr, NodeId self) {
    const NodeId in = gr.inputs(self)[0];
    const auto &xv = gr.value(in);
    const auto &gout = gr.grad(self);
    auto &gin = gr.grad(in);
    for (std::size_t i = 0; i < xv.size(); ++i)
      if (xv[i] > T{0})
        gin[i] += gout[i];
  });
}

template <typename T> NodeId dropout(Graph<T> &g, NodeId input, double rate, Mode mode, Rng &rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout: rate must lie in [0,1), got " + std::to_string(rate));
  const auto &x = g.value(input);
  std::vector<T> mask;
  Tensor<T> out = x;
  if (mode == Mode::Train && rate > 0.0) {
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    mask.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      mask[i] = uniform01(rng) < rate ? T{0} : keep_scale;
      out[i] = x[i] * mask[i];
    }
  }
  return g.add(OpKind::Dropout, {input}, std::move(out), [mask = std::move(mask)](Graph<T> &gr, NodeId self) {
    const NodeId in = gr.inputs(self)[0];
    const auto &gout = gr.grad(self);
    auto &gin = gr.grad(in);
    for (std::size_t i = 0; i < gout.size(); ++i)
      gin[i] += mask.empty() ? gout[i] : gout[i] * mask[i];
  });
}

template <typename T> NodeId slice(Graph<T> &g, NodeId input, std::size_t offset, std::size_t length) {
  const auto &x = g.value(input);
  require(length > 0 && offset + length <= x.size(),
          "slice: range [" + std::to_string(offset) + "," + std::to_string(offset + length) +
              ") outside tensor of " + std::to_string(x.size()) + " elements");
  Tensor<T> out(Shape{length});
  std::copy_n(x.data() + offset, length, out.data());
  return g.add(OpKind::Slice, {input}, std::move(out), [offset, length](Graph<T> &gr, NodeId self) {
    const NodeId in = gr.inputs(self)[0];
    const auto &gout = gr.grad(self);
    auto &gin = gr.grad(in);
    for (std::size_t i = 0; i < length; ++i)
      gin[offset + i] += gout[i];
  });
}

template <typename T> NodeId concat(Graph<T> &g, NodeId first, NodeId second) {
  const auto &a = g.value(first);
  const auto &b = g.value(second);
  Tensor<T> out(Shape{a.size() + b.size()});
  std::copy(a.values().begin(), a.values().end(), out.data());
  std::copy(b.values().begin(), b.values().end(), out.data() + a.size());
  const std::size_t split = a.size();
  return g.add(OpKind::Concat, {first, second}, std::move(out), [split](Graph<T> &gr, NodeId self) {
    const auto &ins = gr.inputs(self);
    const auto &gout = gr.grad(self);
    if (gr.requires_grad(ins[0])) {
      auto &ga = gr.grad(ins[0]);
      for (std::size_t i = 0; i < split; ++i)
        ga[i] += gout[i];
    }
    if (gr.requires_grad(ins[1])) {
      auto &gb = gr.grad(ins[1]);
      for (std::size_t i = split; i < gout.size(); ++i)
        gb[i - split] += gout[i];
    }
  });
}

template <typename T> std::vector<T> softmax(std::span<const T> logits) {
  std::vector<T> p(logits.begin(), logits.end());
  if (p.empty())
    return p;
  const T mx = *std::max_element(p.begin(), p.end());
  T total = T{0};
  for (auto &v : p) {
    v = std::exp(v - mx);
    total += v;
  }
  for (auto &v : p)
    v /= total;
  return p;
}

template <typename T> NodeId softmax_cross_entropy(Graph<T> &g, NodeId logits, std::size_t label) {
  const auto &z = g.value(logits);
  require(label < z.size(), "softmax_cross_entropy: label " + std::to_string(label) + " outside [0," +
                                std::to_string(z.size()) + ")");
  const T mx = *std::max_element(z.values().begin(), z.values().end());
  T total = T{0};
  for (auto v : z.values())
    total += std::exp(v - mx);
  const T loss = std::log(total) - (z[label] - mx);
  return g.add(OpKind::SoftmaxCrossEntropy, {logits}, Tensor<T>::scalar(loss), [label](Graph<T> &gr, NodeId self) {
    const NodeId in = gr.inputs(self)[0];
    const T up = gr.grad(self)[0];
    const auto p = softmax<T>(gr.value(in).values());
    auto &gin = gr.grad(in);
    for (std::size_t i = 0; i < p.size(); ++i)
      gin[i] += up * (p[i] - (i == label ? T{1} : T{0}));
  });
}

template <typename T> NodeId l2_tie_loss(Graph<T> &g, NodeId a, NodeId b, bool squared) {
  const auto &va = g.value(a);
  const auto &vb = g.value(b);
  require(va.size() == vb.size(), "l2_tie_loss: lengths differ (" + std::to_string(va.size()) + " vs " +
                                      std::to_string(vb.size()) + ")");
  T sq = T{0};
  for (std::size_t i = 0; i < va.size(); ++i)
    sq += (va[i] - vb[i]) * (va[i] - vb[i]);
  const T norm = std::sqrt(sq);
  const T loss = squared ? sq : norm;
  return g.add(OpKind::L2Tie, {a, b}, Tensor<T>::scalar(loss), [squared, norm](Graph<T> &gr, NodeId self) {
    const auto &ins = gr.inputs(self);
    const auto &xa = gr.value(ins[0]);
    const auto &xb = gr.value(ins[1]);
    const T up = gr.grad(self)[0];
    const T scale = squared ? T{2} * up : up / std::max(norm, static_cast<T>(1e-12));
    const bool ga = gr.requires_grad(ins[0]), gb = gr.requires_grad(ins[1]);
    for (std::size_t i = 0; i < xa.size(); ++i) {
      const T d = scale * (xa[i] - xb[i]);
      if (ga)
        gr.grad(ins[0])[i] += d;
      if (gb)
        gr.grad(ins[1])[i] -= d;
    }
  });
}

template <typename T> NodeId weighted_sum(Graph<T> &g, const std::vector<std::pair<NodeId, double>> &terms) {
  std::vector<NodeId> ids;
  std::vector<T> weights;
  T total = T{0};
  for (const auto &[id, w] : terms) {
    require(g.value(id).size() == 1, "weighted_sum: terms must be scalars");
    ids.push_back(id);
    weights.push_back(static_cast<T>(w));
    total += static_cast<T>(w) * g.value(id)[0];
  }
  return g.add(OpKind::WeightedSum, ids, Tensor<T>::scalar(total),
               [weights = std::move(weights)](Graph<T> &gr, NodeId self) {
                 const T up = gr.grad(self)[0];
                 const auto &ins = gr.inputs(self);
                 for (std::size_t i = 0; i < ins.size(); ++i)
                   if (gr.requires_grad(ins[i]))
                     gr.grad(ins[i])[0] += up * weights[i];
               });
}

template <typename T> NodeId sum(Graph<T> &g, NodeId input) {
  T total = T{0};
  for (auto v : g.value(input).values())
    total += v;
  return g.add(OpKind::Sum, {input}, Tensor<T>::scalar(total), [](Graph<T> &gr, NodeId self) {
    const NodeId in = gr.inputs(self)[0];
    const T up = gr.grad(self)[0];
    for (auto &v : gr.grad(in).values())
      v += up;
  });
}

#define DISC_INSTANTIATE(T)                                                                        \
  template NodeId conv2d<T>(Graph<T> &, NodeId, NodeId, NodeId, std::size_t, std::size_t);         \
  template NodeId maxpool<T>(Graph<T> &, NodeId, std::size_t, std::size_t);                        \
  template NodeId lrn<T>(Graph<T> &, NodeId, const LrnParams &);                                   \
  template NodeId fully_connected<T>(Graph<T> &, NodeId, NodeId, NodeId);                          \
  template NodeId relu<T>(Graph<T> &, NodeId);                                                     \
  template NodeId dropout<T>(Graph<T> &, NodeId, double, Mode, Rng &);                             \
  template NodeId slice<T>(Graph<T> &, NodeId, std::size_t, std::size_t);                          \
  template NodeId concat<T>(Graph<T> &, NodeId, NodeId);                                           \
  template NodeId softmax_cross_entropy<T>(Graph<T> &, NodeId, std::size_t);                       \
  template NodeId l2_tie_loss<T>(Graph<T> &, NodeId, NodeId, bool);                                \
  template NodeId weighted_sum<T>(Graph<T> &, const std::vector<std::pair<NodeId, double>> &);     \
  template NodeId sum<T>(Graph<T> &, NodeId);                                                      \
  template std::vector<T> softmax<T>(std::span<const T>);

DISC_INSTANTIATE(float)
DISC_INSTANTIATE(double)
#undef DISC_INSTANTIATE

} // namespace disc
