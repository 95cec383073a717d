#pragma once

#include "disc/gradcore/tensor.hpp"
#include "disc/pairgen/pairs.hpp"

namespace disc::pairs {

/// Nearest-neighbour resize of a C x H x W image.
Tensor<float> resize_nearest(const Tensor<float> &image, std::size_t height, std::size_t width);

struct ImagePair {
  Tensor<float> left;
  Tensor<float> right;
  PairedExample meta;
};

/// Resamples each image by its factor, then back to its original shape. The
/// pair metadata, including the pose label, is carried over unchanged.
ImagePair scale_pair(const ImagePair &pair, double factor_left, double factor_right);

} // namespace disc::pairs
