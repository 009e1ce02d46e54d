// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "paanet/dataset.hpp"

namespace paanet {

/// Generator settings.  Backgrounds are smooth value noise; distractor
/// shapes are filled from the same intensity distribution as the
/// background (so they carry no contrast cue); exactly one salient shape
/// is rendered flat at the off-mask mean plus an offset drawn from
/// [contrast_lo, contrast_hi].  The mask marks only the salient shape.
struct SynthConfig {
  int count = 100;
  int size = 64;
  int min_distractors = 2;
  int max_distractors = 4;
  double contrast_lo = 0.28;
  double contrast_hi = 0.38;
  double noise = 0.04;
  /// Fraction of `noise` also applied inside the salient shape.  0 leaves
  /// the fill flat (an easy giveaway for first-order contrast); 1 buries
  /// the region in the same pixel noise as the rest of the scene.
  double salient_noise = 0.0;
  std::uint64_t seed = 0;

  /// Low-contrast, cluttered variant for the order-ablation runs.  The
  /// salient shape carries full pixel noise and its offset sits below the
  /// noise amplitude, so region statistics — not a flat interior or a
  /// crisp edge — are the only reliable cue.
  static SynthConfig challenge() {
    SynthConfig c;
    c.min_distractors = 5;
    c.max_distractors = 8;
    c.contrast_lo = 0.04;
    c.contrast_hi = 0.08;
    c.noise = 0.06;
    c.salient_noise = 1.0;
    return c;
  }
};

/// One sample, deterministic in (cfg.seed, index).  Pixel values are
/// quantized to 8-bit levels, so in-memory samples match a PNG round-trip
/// bit for bit.
Sample synth_sample(const SynthConfig& cfg, int index);

/// cfg.count samples, in index order.
Dataset synth_dataset(const SynthConfig& cfg);

/// Writes `<root>/images/synth_NNNN.png` (RGB) and
/// `<root>/masks/synth_NNNN.png` (grayscale 0/255).  Same seed, same bytes.
void synth_generate(const std::string& root, const SynthConfig& cfg);

}  // namespace paanet
