// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "paanet/layers.hpp"
#include "paanet/rng.hpp"

namespace paanet {

/// One image/ground-truth pair, already resized to the working resolution.
/// Images are (1,3,H,W) in [0,1]; masks are (1,1,H,W) with values in {0,1}.
struct Sample {
  Tensor image;
  Tensor mask;
  std::string name;
};

using Dataset = std::vector<Sample>;

/// Loads stem-matched image/mask pairs, sorted by stem.  Images are
/// bilinearly resized (align-corners) to (height, width) and scaled to
/// [0,1]; grayscale inputs are replicated to 3 channels.  Masks are
/// nearest-neighbor resized, then binarized at 128 (values ≥ 128 become 1).
/// Every image must have a mask and vice versa.
Dataset load_dataset(const std::string& image_dir, const std::string& mask_dir,
                     int height, int width);

/// `<root>/images` + `<root>/masks` convenience layout.
Dataset load_dataset(const std::string& root, int height, int width);

/// Decoded image to a (1,3,H,W) tensor in [0,1] at the target size.
Tensor preprocess_image(const std::string& path, int height, int width);

/// Nearest-neighbor resample of an NCHW tensor (pixel-center rule).
Tensor nearest_resize(const Tensor& t, int out_h, int out_w);

/// Horizontal mirror of an NCHW tensor (w → W−1−w), used for flip
/// augmentation on image and mask alike.
Tensor hflip(const Tensor& t);

}  // namespace paanet
