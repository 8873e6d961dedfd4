#include "skelattack/augment.hpp"

#include <algorithm>
#include <cmath>

#include "skelattack/error.hpp"

namespace skelattack {

void AugmentationConfig::validate() const {
  if (!(rotation_max_rad >= 0.0)) throw Error("augment.rotation_max_rad must be >= 0");
  if (!(scale_min > 0.0) || !(scale_max >= scale_min)) {
    throw Error("augment scale range must be positive and ordered");
  }
  if (!(jitter_sigma >= 0.0)) throw Error("augment.jitter_sigma must be >= 0");
  if (!(crop_min > 0.0) || !(crop_max <= 1.0) || !(crop_max >= crop_min)) {
    throw Error("augment crop ratios must lie in (0, 1] and be ordered");
  }
}

AugmentationConfig AugmentationConfig::identity() {
  AugmentationConfig cfg;
  cfg.rotation_max_rad = 0.0;
  cfg.scale_min = cfg.scale_max = 1.0;
  cfg.jitter_sigma = 0.0;
  cfg.crop_min = cfg.crop_max = 1.0;
  return cfg;
}

Tensor3 crop_and_resample(const Tensor3& frames, double start, double length) {
  const std::size_t n = frames.frames();
  Tensor3 out(n, frames.joints(), frames.channels());
  const double last = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = n == 1 ? start : start + (length - 1.0) * static_cast<double>(i) / last;
    const double clamped = std::clamp(pos, 0.0, last);
    const auto lo = static_cast<std::size_t>(std::floor(clamped));
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double w = clamped - static_cast<double>(lo);
    auto a = frames.frame(lo);
    auto b = frames.frame(hi);
    auto o = out.frame(i);
    for (std::size_t k = 0; k < o.size(); ++k) {
      o[k] = w == 0.0 ? a[k] : (1.0 - w) * a[k] + w * b[k];
    }
  }
  return out;
}

Tensor3 augment(const Tensor3& frames, const AugmentationConfig& cfg,
                std::mt19937_64& rng) {
  cfg.validate();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Draw every random quantity up front so the stream consumption does not
  // depend on which augmentations are enabled.
  const double angle = cfg.rotation_max_rad * (2.0 * unit(rng) - 1.0);
  const double scale = cfg.scale_min + (cfg.scale_max - cfg.scale_min) * unit(rng);
  const double crop_ratio = cfg.crop_min + (cfg.crop_max - cfg.crop_min) * unit(rng);
  const double crop_pos = unit(rng);

  Tensor3 out = frames;
  const double cs = std::cos(angle);
  const double sn = std::sin(angle);
  const bool rotate = frames.channels() >= 3;
  for (std::size_t t = 0; t < out.frames(); ++t) {
    for (std::size_t j = 0; j < out.joints(); ++j) {
      if (rotate) {
        const double x = out(t, j, 0);
        const double z = out(t, j, 2);
        out(t, j, 0) = cs * x + sn * z;
        out(t, j, 2) = -sn * x + cs * z;
      }
      for (std::size_t c = 0; c < out.channels(); ++c) {
        double& v = out(t, j, c);
        v *= scale;
        v += cfg.jitter_sigma * normal(rng);
      }
    }
  }

  const std::size_t n = frames.frames();
  auto length = static_cast<std::size_t>(std::lround(crop_ratio * static_cast<double>(n)));
  length = std::clamp<std::size_t>(length, std::min<std::size_t>(2, n), n);
  const auto start = static_cast<double>(static_cast<std::size_t>(
      std::floor(crop_pos * static_cast<double>(n - length + 1))) % (n - length + 1));
  if (length == n) return out;
  return crop_and_resample(out, start, static_cast<double>(length));
}

}  // namespace skelattack
