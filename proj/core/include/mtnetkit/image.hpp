#pragma once

#include <filesystem>

#include "mtnetkit/tensor.hpp"

namespace mtnet {

/// One aligned RGB/thermal frame pair. rgb is [3,H,W], thermal [1,H,W],
/// both in [0,1].
struct Frame {
  Tensor rgb;
  Tensor thermal;
  int index = 0;

  std::size_t height() const { return rgb.dim(1); }
  std::size_t width() const { return rgb.dim(2); }
};

/// Throws ShapeError unless rgb/thermal are [3,H,W]/[1,H,W] with values in [0,1].
void validate_frame(const Frame& frame);

// Binary netpbm, maxval 255. Reading divides by 255; writing rounds
// value*255 to the nearest integer after clamping to [0,1].
Tensor read_ppm(const std::filesystem::path& path);
Tensor read_pgm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Tensor& rgb);
void write_pgm(const std::filesystem::path& path, const Tensor& gray);

}  // namespace mtnet
