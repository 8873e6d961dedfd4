#pragma once

#include <cstdint>
#include <random>

#include "skelattack/tensor.hpp"

namespace skelattack {

struct AugmentationConfig {
  double rotation_max_rad = 0.3;
  double scale_min = 0.9;
  double scale_max = 1.1;
  double jitter_sigma = 0.01;
  double crop_min = 0.5;
  double crop_max = 1.0;
  std::uint64_t seed = 11;

  void validate() const;
  // All four augmentations switched off.
  static AugmentationConfig identity();
};

// Applied in order: rotation about the vertical (y) axis, uniform scale,
// per-coordinate Gaussian jitter, then a contiguous temporal crop linearly
// resampled back to the original frame count. Channel 1 is treated as
// vertical; inputs with fewer than 3 channels skip the rotation.
Tensor3 augment(const Tensor3& frames, const AugmentationConfig& cfg,
                std::mt19937_64& rng);

// Linear resampling of frames [start, start + length - 1] onto `frames`
// evenly spaced points.
Tensor3 crop_and_resample(const Tensor3& frames, double start, double length);

}  // namespace skelattack
