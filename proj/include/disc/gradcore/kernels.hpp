#pragma once

#include <cstddef>
#include <span>

// Dense compute kernels for the convolution and fully connected layers.
//
// Two implementations with identical contracts:
//   reference  straightforward serial loops, kept as the testing oracle
//   parallel   im2col/row-blocked loops with OpenMP work sharing
//
// Every parallel kernel assigns each output element to exactly one thread and
// sums in a fixed order, so results do not depend on the thread count.
// Backward kernels accumulate (+=) into their gradient outputs.

namespace disc::kernels {

struct ConvGeometry {
  std::size_t in_channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  std::size_t pad = 0;

  std::size_t out_h() const { return (height + 2 * pad - kernel_h) / stride + 1; }
  std::size_t out_w() const { return (width + 2 * pad - kernel_w) / stride + 1; }
  std::size_t patch() const { return in_channels * kernel_h * kernel_w; }
};

namespace reference {

template <typename T>
void conv2d_forward(const ConvGeometry &g, std::span<const T> input, std::span<const T> kernels,
                    std::span<const T> bias, std::span<T> output);

template <typename T>
void conv2d_backward(const ConvGeometry &g, std::span<const T> input, std::span<const T> kernels,
                     std::span<const T> grad_output, std::span<T> grad_input,
                     std::span<T> grad_kernels, std::span<T> grad_bias);

// out[m] = W[m,n] x[n] + b[m]
template <typename T>
void fc_forward(std::size_t m, std::size_t n, std::span<const T> x, std::span<const T> weights,
                std::span<const T> bias, std::span<T> out);

template <typename T>
void fc_backward(std::size_t m, std::size_t n, std::span<const T> x, std::span<const T> weights,
                 std::span<const T> grad_out, std::span<T> grad_x, std::span<T> grad_weights,
                 std::span<T> grad_bias);

} // namespace reference

namespace parallel {

template <typename T>
void conv2d_forward(const ConvGeometry &g, std::span<const T> input, std::span<const T> kernels,
                    std::span<const T> bias, std::span<T> output);

template <typename T>
void conv2d_backward(const ConvGeometry &g, std::span<const T> input, std::span<const T> kernels,
                     std::span<const T> grad_output, std::span<T> grad_input,
                     std::span<T> grad_kernels, std::span<T> grad_bias);

template <typename T>
void fc_forward(std::size_t m, std::size_t n, std::span<const T> x, std::span<const T> weights,
                std::span<const T> bias, std::span<T> out);

template <typename T>
void fc_backward(std::size_t m, std::size_t n, std::span<const T> x, std::span<const T> weights,
                 std::span<const T> grad_out, std::span<T> grad_x, std::span<T> grad_weights,
                 std::span<T> grad_bias);

} // namespace parallel

} // namespace disc::kernels
