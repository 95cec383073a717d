#include "disc/gradcore/kernels.hpp"

#include <algorithm>
#include <vector>

namespace disc::kernels::parallel {
namespace {

constexpr std::size_t kLanes = 16;

// Lane-split dot product. The lane count and the final lane order are fixed,
// so the result is reproducible while still vectorizing.
template <typename T> T dot(const T *a, const T *b, std::size_t n) {
  T lanes[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (std::size_t l = 0; l < kLanes; ++l)
      lanes[l] += a[i + l] * b[i + l];
  T acc = T{0};
  for (std::size_t l = 0; l < kLanes; ++l)
    acc += lanes[l];
  for (; i < n; ++i)
    acc += a[i] * b[i];
  return acc;
}

template <typename T> T sum(const T *a, std::size_t n) {
  T lanes[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (std::size_t l = 0; l < kLanes; ++l)
      lanes[l] += a[i + l];
  T acc = T{0};
  for (std::size_t l = 0; l < kLanes; ++l)
    acc += lanes[l];
  for (; i < n; ++i)
    acc += a[i];
  return acc;
}

template <typename T> void axpy(T alpha, const T *x, T *y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    y[i] += alpha * x[i];
}

// col[(ci*kh + ky)*kw + kx][y*ow + x] = padded input
template <typename T> void im2col(const ConvGeometry &g, const T *input, T *col) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), positions = oh * ow;
  const auto rows = static_cast<std::ptrdiff_t>(g.patch());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < rows; ++k) {
    const std::size_t kx = static_cast<std::size_t>(k) % g.kernel_w;
    const std::size_t ky = (static_cast<std::size_t>(k) / g.kernel_w) % g.kernel_h;
    const std::size_t ci = static_cast<std::size_t>(k) / (g.kernel_w * g.kernel_h);
    T *row = col + static_cast<std::size_t>(k) * positions;
    for (std::size_t y = 0; y < oh; ++y) {
      const auto iy = static_cast<std::ptrdiff_t>(y * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
      for (std::size_t x = 0; x < ow; ++x) {
        const auto ix =
            static_cast<std::ptrdiff_t>(x * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
        const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.height) &&
                            ix < static_cast<std::ptrdiff_t>(g.width);
        row[y * ow + x] = inside ? input[(ci * g.height + iy) * g.width + ix] : T{0};
      }
    }
  }
}

} // namespace

template <typename T>
void conv2d_forward(const ConvGeometry &g, std::span<const T> input, std::span<const T> kernels,
                    std::span<const T> bias, std::span<T> output) {
  const std::size_t positions = g.out_h() * g.out_w(), patch = g.patch();
  std::vector<T> col(patch * positions);
  im2col(g, input.data(), col.data());
  const auto outs = static_cast<std::ptrdiff_t>(g.out_channels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t co = 0; co < outs; ++co) {
    T *row = output.data() + static_cast<std::size_t>(co) * positions;
    std::fill(row, row + positions, bias[static_cast<std::size_t>(co)]);
    const T *w = kernels.data() + static_cast<std::size_t>(co) * patch;
    for (std::size_t k = 0; k < patch; ++k)
      axpy(w[k], col.data() + k * positions, row, positions);
  }
}

template <typename T>
void conv2d_backward(const ConvGeometry &g, std::span<const T> input, std::span<const T> kernels,
                     std::span<const T> grad_output, std::span<T> grad_input,
                     std::span<T> grad_kernels, std::span<T> grad_bias) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), positions = oh * ow, patch = g.patch();
  const auto outs = static_cast<std::ptrdiff_t>(g.out_channels);

  if (!grad_bias.empty()) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t co = 0; co < outs; ++co)
      grad_bias[static_cast<std::size_t>(co)] +=
          sum(grad_output.data() + static_cast<std::size_t>(co) * positions, positions);
  }

  if (!grad_kernels.empty()) {
    std::vector<T> col(patch * positions);
    im2col(g, input.data(), col.data());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t co = 0; co < outs; ++co) {
      const T *go = grad_output.data() + static_cast<std::size_t>(co) * positions;
      T *gw = grad_kernels.data() + static_cast<std::size_t>(co) * patch;
      for (std::size_t k = 0; k < patch; ++k)
        gw[k] += dot(go, col.data() + k * positions, positions);
    }
  }

  if (!grad_input.empty()) {
    std::vector<T> dcol(patch * positions, T{0});
    const auto rows = static_cast<std::ptrdiff_t>(patch);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < rows; ++k) {
      T *row = dcol.data() + static_cast<std::size_t>(k) * positions;
      for (std::size_t co = 0; co < g.out_channels; ++co)
        axpy(kernels[co * patch + static_cast<std::size_t>(k)], grad_output.data() + co * positions,
             row, positions);
    }
    // col2im: each input channel is owned by one thread.
    const auto channels = static_cast<std::ptrdiff_t>(g.in_channels);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ci = 0; ci < channels; ++ci) {
      T *gin = grad_input.data() + static_cast<std::size_t>(ci) * g.height * g.width;
      for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
        for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
          const T *row =
              dcol.data() + ((static_cast<std::size_t>(ci) * g.kernel_h + ky) * g.kernel_w + kx) * positions;
          for (std::size_t y = 0; y < oh; ++y) {
            const auto iy =
                static_cast<std::ptrdiff_t>(y * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height))
              continue;
            for (std::size_t x = 0; x < ow; ++x) {
              const auto ix =
                  static_cast<std::ptrdiff_t>(x * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width))
                continue;
              gin[iy * static_cast<std::ptrdiff_t>(g.width) + ix] += row[y * ow + x];
            }
          }
        }
    }
  }
}

template <typename T>
void fc_forward(std::size_t m, std::size_t n, std::span<const T> x, std::span<const T> weights,
                std::span<const T> bias, std::span<T> out) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    out[r] = bias[r] + dot(weights.data() + r * n, x.data(), n);
  }
}

template <typename T>
void fc_backward(std::size_t m, std::size_t n, std::span<const T> x, std::span<const T> weights,
                 std::span<const T> grad_out, std::span<T> grad_x, std::span<T> grad_weights,
                 std::span<T> grad_bias) {
  if (!grad_bias.empty())
    for (std::size_t i = 0; i < m; ++i)
      grad_bias[i] += grad_out[i];

  const auto rows = static_cast<std::ptrdiff_t>(m);
  if (!grad_weights.empty()) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
      const auto r = static_cast<std::size_t>(i);
      axpy(grad_out[r], x.data(), grad_weights.data() + r * n, n);
    }
  }

  if (!grad_x.empty()) {
    // Column blocks; each block walks every row in order.
    constexpr std::size_t block = 256;
    const auto blocks = static_cast<std::ptrdiff_t>((n + block - 1) / block);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < blocks; ++b) {
      const std::size_t lo = static_cast<std::size_t>(b) * block;
      const std::size_t len = std::min(block, n - lo);
      for (std::size_t i = 0; i < m; ++i)
        axpy(grad_out[i], weights.data() + i * n + lo, grad_x.data() + lo, len);
    }
  }
}

#define DISC_INSTANTIATE(T)                                                                        \
  template void conv2d_forward<T>(const ConvGeometry &, std::span<const T>, std::span<const T>,    \
                                  std::span<const T>, std::span<T>);                               \
  template void conv2d_backward<T>(const ConvGeometry &, std::span<const T>, std::span<const T>,   \
                                   std::span<const T>, std::span<T>, std::span<T>, std::span<T>);  \
  template void fc_forward<T>(std::size_t, std::size_t, std::span<const T>, std::span<const T>,    \
                              std::span<const T>, std::span<T>);                                   \
  template void fc_backward<T>(std::size_t, std::size_t, std::span<const T>, std::span<const T>,   \
                               std::span<const T>, std::span<T>, std::span<T>, std::span<T>);

DISC_INSTANTIATE(float)
DISC_INSTANTIATE(double)
#undef DISC_INSTANTIATE

} // namespace disc::kernels::parallel
