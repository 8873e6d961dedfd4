#include <doctest.h>

#include <cmath>

#include "skelattack/augment.hpp"
#include "skelattack/error.hpp"
#include "skelattack/motion.hpp"
#include "support.hpp"

using namespace skelattack;
using skelattack::testing::max_abs_diff;
using skelattack::testing::random_tensor;

namespace {

std::vector<double> bone_lengths(const Tensor3& x) {
  const Tensor3 b = compute_bones(x, SkeletonTopology::for_joint_count(x.joints()));
  std::vector<double> out;
  for (std::size_t t = 0; t < b.frames(); ++t) {
    for (std::size_t e = 0; e < b.joints(); ++e) {
      double sq = 0.0;
      for (std::size_t c = 0; c < b.channels(); ++c) sq += b(t, e, c) * b(t, e, c);
      out.push_back(std::sqrt(sq));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("identity configuration") {
  const Tensor3 x = random_tensor(16, 25, 3, 1);
  std::mt19937_64 rng(4);
  CHECK(augment(x, AugmentationConfig::identity(), rng) == x);
}

TEST_CASE("rotation preserves bone lengths") {
  AugmentationConfig cfg = AugmentationConfig::identity();
  cfg.rotation_max_rad = 0.3;
  const Tensor3 x = random_tensor(12, 25, 3, 2);
  const auto before = bone_lengths(x);
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor3 y = augment(x, cfg, rng);
    CHECK(max_abs_diff(x, y) > 0.0);
    const auto after = bone_lengths(y);
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(std::abs(before[i] - after[i]) < 1e-9);
  }
}

TEST_CASE("rotation and scale keep bone length ratios") {
  AugmentationConfig cfg = AugmentationConfig::identity();
  cfg.rotation_max_rad = 0.3;
  cfg.scale_min = 0.9;
  cfg.scale_max = 1.1;
  const Tensor3 x = random_tensor(6, 25, 3, 3);
  std::mt19937_64 rng(9);
  const Tensor3 y = augment(x, cfg, rng);
  const auto before = bone_lengths(x);
  const auto after = bone_lengths(y);
  const double factor = after[0] / before[0];
  CHECK(factor >= 0.9 - 1e-12);
  CHECK(factor <= 1.1 + 1e-12);
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(after[i] == doctest::Approx(factor * before[i]).epsilon(1e-9));
  }
}

TEST_CASE("crop of a constant sequence is a no-op") {
  AugmentationConfig cfg = AugmentationConfig::identity();
  cfg.crop_min = 0.3;
  cfg.crop_max = 0.8;
  Tensor3 x(20, 4, 3);
  for (std::size_t j = 0; j < 4; ++j) {
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t t = 0; t < 20; ++t) x(t, j, c) = 0.1 * j - 0.2 * c;
    }
  }
  std::mt19937_64 rng(10);
  CHECK(max_abs_diff(augment(x, cfg, rng), x) < 1e-12);
}

TEST_CASE("crop_and_resample") {
  Tensor3 x(5, 1, 1);
  for (std::size_t t = 0; t < 5; ++t) x(t, 0, 0) = static_cast<double>(t * t);
  SUBCASE("full span is the identity") { CHECK(crop_and_resample(x, 0.0, 5.0) == x); }
  SUBCASE("half span interpolates linearly") {
    // Frames 0..2 resampled onto 5 points: positions 0, .5, 1, 1.5, 2.
    const Tensor3 y = crop_and_resample(x, 0.0, 3.0);
    CHECK(y(0, 0, 0) == doctest::Approx(0.0));
    CHECK(y(1, 0, 0) == doctest::Approx(0.5));
    CHECK(y(2, 0, 0) == doctest::Approx(1.0));
    CHECK(y(3, 0, 0) == doctest::Approx(2.5));
    CHECK(y(4, 0, 0) == doctest::Approx(4.0));
  }
}

TEST_CASE("shape and determinism") {
  const Tensor3 x = random_tensor(32, 25, 3, 5);
  AugmentationConfig cfg;
  std::mt19937_64 a(cfg.seed);
  std::mt19937_64 b(cfg.seed);
  for (int i = 0; i < 10; ++i) {
    const Tensor3 ya = augment(x, cfg, a);
    const Tensor3 yb = augment(x, cfg, b);
    CHECK(ya.same_shape(x));
    CHECK(ya == yb);
  }
}

TEST_CASE("tiny crops are clamped to two frames") {
  AugmentationConfig cfg = AugmentationConfig::identity();
  cfg.crop_min = 0.01;
  cfg.crop_max = 0.01;
  const Tensor3 x = random_tensor(8, 2, 3, 6);
  std::mt19937_64 rng(1);
  const Tensor3 y = augment(x, cfg, rng);
  CHECK(y.same_shape(x));
  for (double v : y.flat()) CHECK(std::isfinite(v));
}

TEST_CASE("configuration validation") {
  AugmentationConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.rotation_max_rad = -0.1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = AugmentationConfig{};
  cfg.scale_min = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = AugmentationConfig{};
  cfg.crop_max = 1.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = AugmentationConfig{};
  cfg.crop_min = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
