#include "disc/gradcore/kernels.hpp"

namespace disc::kernels::reference {

template <typename T>
void conv2d_forward(const ConvGeometry &g, std::span<const T> input, std::span<const T> kernels,
                    std::span<const T> bias, std::span<T> output) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t co = 0; co < g.out_channels; ++co)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        T acc = bias[co];
        for (std::size_t ci = 0; ci < g.in_channels; ++ci)
          for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
              const auto iy = static_cast<std::ptrdiff_t>(y * g.stride + ky) -
                              static_cast<std::ptrdiff_t>(g.pad);
              const auto ix = static_cast<std::ptrdiff_t>(x * g.stride + kx) -
                              static_cast<std::ptrdiff_t>(g.pad);
              if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(g.height) ||
                  ix >= static_cast<std::ptrdiff_t>(g.width))
                continue;
              acc += kernels[((co * g.in_channels + ci) * g.kernel_h + ky) * g.kernel_w + kx] *
                     input[(ci * g.height + iy) * g.width + ix];
            }
        output[(co * oh + y) * ow + x] = acc;
      }
}

template <typename T>
void conv2d_backward(const ConvGeometry &g, std::span<const T> input, std::span<const T> kernels,
                     std::span<const T> grad_output, std::span<T> grad_input,
                     std::span<T> grad_kernels, std::span<T> grad_bias) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t co = 0; co < g.out_channels; ++co)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        const T go = grad_output[(co * oh + y) * ow + x];
        if (!grad_bias.empty())
          grad_bias[co] += go;
        for (std::size_t ci = 0; ci < g.in_channels; ++ci)
          for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
              const auto iy = static_cast<std::ptrdiff_t>(y * g.stride + ky) -
                              static_cast<std::ptrdiff_t>(g.pad);
              const auto ix = static_cast<std::ptrdiff_t>(x * g.stride + kx) -
                              static_cast<std::ptrdiff_t>(g.pad);
              if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(g.height) ||
                  ix >= static_cast<std::ptrdiff_t>(g.width))
                continue;
              const std::size_t ki = ((co * g.in_channels + ci) * g.kernel_h + ky) * g.kernel_w + kx;
              const std::size_t ii = (ci * g.height + iy) * g.width + ix;
              if (!grad_kernels.empty())
                grad_kernels[ki] += go * input[ii];
              if (!grad_input.empty())
                grad_input[ii] += go * kernels[ki];
            }
      }
}

template <typename T>
void fc_forward(std::size_t m, std::size_t n, std::span<const T> x, std::span<const T> weights,
                std::span<const T> bias, std::span<T> out) {
  for (std::size_t i = 0; i < m; ++i) {
    T acc = bias[i];
    for (std::size_t j = 0; j < n; ++j)
      acc += weights[i * n + j] * x[j];
    out[i] = acc;
  }
}

template <typename T>
void fc_backward(std::size_t m, std::size_t n, std::span<const T> x, std::span<const T> weights,
                 std::span<const T> grad_out, std::span<T> grad_x, std::span<T> grad_weights,
                 std::span<T> grad_bias) {
  for (std::size_t i = 0; i < m; ++i) {
    if (!grad_bias.empty())
      grad_bias[i] += grad_out[i];
    for (std::size_t j = 0; j < n; ++j) {
      if (!grad_weights.empty())
        grad_weights[i * n + j] += grad_out[i] * x[j];
      if (!grad_x.empty())
        grad_x[j] += grad_out[i] * weights[i * n + j];
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

} // namespace disc::kernels::reference
