#include "disc/pairgen/scale.hpp"

#include <algorithm>
#include <cmath>

#include "disc/errors.hpp"

namespace disc::pairs {

Tensor<float> resize_nearest(const Tensor<float> &image, std::size_t height, std::size_t width) {
  const auto &s = image.shape();
  if (s.size() != 3)
    throw std::invalid_argument("resize_nearest expects a C x H x W image, got " + to_string(s));
  const std::size_t channels = s[0], h = s[1], w = s[2];
  Tensor<float> out(Shape{channels, height, width});
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t y = 0; y < height; ++y) {
      const auto sy = std::min(h - 1, static_cast<std::size_t>((static_cast<double>(y) + 0.5) * h / height));
      for (std::size_t x = 0; x < width; ++x) {
        const auto sx = std::min(w - 1, static_cast<std::size_t>((static_cast<double>(x) + 0.5) * w / width));
        out[(c * height + y) * width + x] = image[(c * h + sy) * w + sx];
      }
    }
  return out;
}

namespace {

Tensor<float> rescale(const Tensor<float> &image, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor))
    throw ConfigError("scale factor must be positive, got " + std::to_string(factor));
  const auto h = image.shape()[1], w = image.shape()[2];
  const auto sh = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(h) * factor)));
  const auto sw = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(w) * factor)));
  if (sh == h && sw == w)
    return image;
  return resize_nearest(resize_nearest(image, sh, sw), h, w);
}

} // namespace

ImagePair scale_pair(const ImagePair &pair, double factor_left, double factor_right) {
  return {rescale(pair.left, factor_left), rescale(pair.right, factor_right), pair.meta};
}

} // namespace disc::pairs
