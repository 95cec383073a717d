#pragma once

#include <filesystem>

#include "disc/gradcore/tensor.hpp"

namespace disc {

/// Binary PPM (P6) for 3 x H x W images and PGM (P5) for 1 x H x W, 8 bits per
/// channel. Values are clamped to [0, 1] and rounded to the nearest level.
void write_ppm(const std::filesystem::path &path, const Tensor<float> &image);
void write_pgm(const std::filesystem::path &path, const Tensor<float> &image);

/// Reads P5 or P6 (maxval 255) into C x H x W floats in [0, 1].
Tensor<float> read_pnm(const std::filesystem::path &path);

/// Exact float a stored 8-bit level decodes to; write then read returns
/// quantize(x) elementwise.
float quantize_level(float x);

} // namespace disc
