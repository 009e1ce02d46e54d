// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "paanet/layers.hpp"

namespace paanet {

/// 8-bit interleaved raster, 1 (gray) or 3 (RGB) channels, row-major.
struct ImageU8 {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t& at(int h, int w, int c) {
    return pixels[(static_cast<std::size_t>(h) * width + w) * channels + c];
  }
  std::uint8_t at(int h, int w, int c) const {
    return pixels[(static_cast<std::size_t>(h) * width + w) * channels + c];
  }
};

/// Decodes a PNG or JPEG (chosen by sniffing the signature).  Palette,
/// sub-8-bit, 16-bit, and alpha inputs are folded to 8-bit gray or RGB.
ImageU8 read_image(const std::string& path);

/// 8-bit gray or RGB PNG.
void write_png(const std::string& path, const ImageU8& img);

/// (1,C,H,W) in [0,1] from an 8-bit raster.
Tensor image_to_tensor(const ImageU8& img);

/// (1,1,H,W) in [0,1] to 8-bit grayscale, rounding to nearest level.
ImageU8 tensor_to_gray_u8(const Tensor& t);

/// (1,3,H,W) in [0,1] to 8-bit RGB, rounding to nearest level.
ImageU8 tensor_to_rgb_u8(const Tensor& t);

}  // namespace paanet
