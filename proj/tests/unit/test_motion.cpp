#include <doctest.h>

#include <Eigen/Dense>
#include <cstring>
#include <limits>
#include <sstream>

#include "skelattack/binary_io.hpp"
#include "skelattack/dataset_io.hpp"
#include "skelattack/error.hpp"
#include "skelattack/motion.hpp"
#include "support.hpp"

using namespace skelattack;
using skelattack::testing::random_tensor;
using skelattack::testing::TempDir;

TEST_CASE("topology validation") {
  CHECK(SkeletonTopology::standard25().bones().size() == 24);
  CHECK(SkeletonTopology::chain(5).bones().size() == 4);
  CHECK_THROWS_AS(SkeletonTopology(3, {{0, 1}, {1, 0}}), Error);      // cycle
  CHECK_THROWS_AS(SkeletonTopology(3, {{0, 1}}), Error);              // too few edges
  CHECK_THROWS_AS(SkeletonTopology(3, {{0, 1}, {1, 3}}), Error);      // out of range
  CHECK_NOTHROW(SkeletonTopology(3, {{2, 1}, {1, 0}}));
  CHECK(SkeletonTopology::for_joint_count(25) == SkeletonTopology::standard25());
  CHECK(SkeletonTopology::for_joint_count(7) == SkeletonTopology::chain(7));
}

TEST_CASE("sequence invariants") {
  const auto topo = SkeletonTopology::chain(2);
  CHECK_THROWS_AS(SkeletalSequence(Tensor3(2, 2, 3), topo), Error);  // T < 3
  CHECK_THROWS_AS(SkeletalSequence(Tensor3(3, 3, 3), topo), Error);  // J mismatch
  Tensor3 bad(3, 2, 3);
  bad(1, 1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(SkeletalSequence(bad, topo), Error);
  CHECK_NOTHROW(SkeletalSequence(Tensor3(3, 2, 3), topo, 4));
}

TEST_CASE("compute_bones") {
  SUBCASE("two joints") {
    Tensor3 x(1, 2, 3);
    x(0, 1, 0) = 1.0;
    const Tensor3 b = compute_bones(x, SkeletonTopology::chain(2));
    CHECK(b.frames() == 1);
    CHECK(b.joints() == 1);
    CHECK(b(0, 0, 0) == 1.0);
    CHECK(b(0, 0, 1) == 0.0);
    CHECK(b(0, 0, 2) == 0.0);
  }
  SUBCASE("coincident joints give zero bones") {
    Tensor3 x(4, 2, 3, 0.37);
    const Tensor3 b = compute_bones(x, SkeletonTopology::chain(2));
    for (double v : b.flat()) CHECK(v == 0.0);
  }
  SUBCASE("standard topology shape") {
    const Tensor3 b = compute_bones(random_tensor(10, 25, 3, 1), SkeletonTopology::standard25());
    CHECK(b.frames() == 10);
    CHECK(b.joints() == 24);
    CHECK(b.channels() == 3);
  }
  SUBCASE("bone count is joints minus one for any tree") {
    for (std::size_t n : {1u, 2u, 9u, 40u}) {
      CHECK(compute_bones(random_tensor(3, n, 3, n), SkeletonTopology::chain(n)).joints() == n - 1);
    }
  }
}

TEST_CASE("second_difference") {
  SUBCASE("linear motion") {
    Tensor3 x(6, 2, 3);
    for (std::size_t t = 0; t < 6; ++t) {
      for (std::size_t j = 0; j < 2; ++j) {
        for (std::size_t c = 0; c < 3; ++c) x(t, j, c) = t * (0.5 + j - 0.25 * c);
      }
    }
    const Tensor3 d = second_difference(x);
    for (double v : d.flat()) CHECK(v == doctest::Approx(0.0));
  }
  SUBCASE("constant") {
    const Tensor3 d = second_difference(Tensor3(5, 3, 3, 1.5));
    for (double v : d.flat()) CHECK(v == 0.0);
  }
  SUBCASE("scalar 0 1 4") {
    Tensor3 x(3, 1, 1);
    x(1, 0, 0) = 1.0;
    x(2, 0, 0) = 4.0;
    const Tensor3 d = second_difference(x);
    REQUIRE(d.size() == 1);
    CHECK(d(0, 0, 0) == 2.0);
  }
  SUBCASE("too short") {
    CHECK_THROWS_WITH(second_difference(Tensor3(2, 1, 1)), "sequence too short for acceleration");
  }
  SUBCASE("linearity") {
    const Tensor3 x = random_tensor(9, 4, 3, 2);
    const Tensor3 y = random_tensor(9, 4, 3, 3);
    Tensor3 mix = x;
    for (std::size_t i = 0; i < mix.size(); ++i) mix.flat()[i] = 2.5 * x.flat()[i] - 0.75 * y.flat()[i];
    const Tensor3 dx = second_difference(x);
    const Tensor3 dy = second_difference(y);
    const Tensor3 dm = second_difference(mix);
    for (std::size_t i = 0; i < dm.size(); ++i) {
      CHECK(dm.flat()[i] == doctest::Approx(2.5 * dx.flat()[i] - 0.75 * dy.flat()[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("synthetic dataset") {
  SyntheticSpec spec;
  SUBCASE("deterministic") {
    CHECK(generate_synthetic_dataset(spec) == generate_synthetic_dataset(spec));
    SyntheticSpec other = spec;
    other.seed = spec.seed + 1;
    CHECK_FALSE(generate_synthetic_dataset(spec) == generate_synthetic_dataset(other));
  }
  SUBCASE("counts and labels") {
    spec.class_count = 2;
    spec.per_class = 5;
    const auto data = generate_synthetic_dataset(spec);
    REQUIRE(data.size() == 10);
    int per_label[2] = {0, 0};
    for (const auto& s : data) {
      REQUIRE(s.label().has_value());
      ++per_label[*s.label()];
      CHECK(s.frame_count() == 32);
      CHECK(s.joint_count() == 25);
    }
    CHECK(per_label[0] == 5);
    CHECK(per_label[1] == 5);
  }
  SUBCASE("range and float precision") {
    for (const auto& s : generate_synthetic_dataset(spec)) {
      for (double v : s.frames().flat()) {
        CHECK(std::abs(v) <= 1.0);
        CHECK(static_cast<double>(static_cast<float>(v)) == v);
      }
    }
  }
  SUBCASE("invalid specs") {
    SyntheticSpec bad = spec;
    bad.class_count = 1;
    CHECK_THROWS_AS(generate_synthetic_dataset(bad), Error);
    bad = spec;
    bad.per_class = 0;
    CHECK_THROWS_AS(generate_synthetic_dataset(bad), Error);
    bad = spec;
    bad.frames = 7;
    CHECK_THROWS_AS(generate_synthetic_dataset(bad), Error);
  }
  SUBCASE("linearly separable on mean features") {
    // Least-squares one-vs-all on each sequence's time-averaged pose.
    const auto data = generate_synthetic_dataset(spec);
    const auto n = static_cast<Eigen::Index>(data.size());
    const Eigen::Index f = 75;
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(n, f + 1);
    Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(n, spec.class_count);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Tensor3& x = data[static_cast<std::size_t>(i)].frames();
      for (Eigen::Index k = 0; k < f; ++k) {
        double sum = 0.0;
        for (std::size_t t = 0; t < x.frames(); ++t) sum += x.at_dof(t, static_cast<std::size_t>(k));
        X(i, k) = sum / static_cast<double>(x.frames());
      }
      Y(i, *data[static_cast<std::size_t>(i)].label()) = 1.0;
    }
    const Eigen::MatrixXd W = X.completeOrthogonalDecomposition().solve(Y);
    const Eigen::MatrixXd scores = X * W;
    int hits = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      scores.row(i).maxCoeff(&best);
      if (best == *data[static_cast<std::size_t>(i)].label()) ++hits;
    }
    CHECK(static_cast<double>(hits) / static_cast<double>(n) > 0.9);
  }
}

namespace {

std::string expected_bytes(const Tensor3& x, std::int32_t label) {
  std::ostringstream out(std::ios::binary);
  out.write("SKEL", 4);
  auto u32 = [&](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  u32(1);
  u32(1);
  u32(static_cast<std::uint32_t>(x.frames()));
  u32(static_cast<std::uint32_t>(x.joints()));
  u32(static_cast<std::uint32_t>(x.channels()));
  u32(static_cast<std::uint32_t>(label));
  for (double v : x.flat()) {
    const auto f = static_cast<float>(v);
    std::uint32_t bits = 0;
    std::memcpy(&bits, &f, 4);
    u32(bits);
  }
  return out.str();
}

}  // namespace

TEST_CASE("dataset file") {
  SUBCASE("byte layout") {
    Tensor3 x(3, 2, 3);
    for (std::size_t i = 0; i < x.size(); ++i) x.flat()[i] = 0.25 * static_cast<double>(i) - 1.0;
    const SkeletalSequence s(x, SkeletonTopology::chain(2), 7);
    CHECK(encode_dataset({s}) == expected_bytes(x, 7));
    CHECK(encode_dataset({s.without_label()}) == expected_bytes(x, -1));
  }
  SUBCASE("round trip with absent labels") {
    TempDir dir("motion");
    auto data = generate_synthetic_dataset(SyntheticSpec{3, 1, 12, 9, 0.01});
    data[1] = data[1].without_label();
    write_dataset(dir.file("d.skel"), data);
    const auto back = read_dataset(dir.file("d.skel"));
    REQUIRE(back.size() == 3);
    CHECK(back == data);
    CHECK_FALSE(back[1].label().has_value());
  }
  SUBCASE("round trip of a full synthetic dataset") {
    const auto data = generate_synthetic_dataset(SyntheticSpec{});
    CHECK(decode_dataset(encode_dataset(data)) == data);
  }
  SUBCASE("empty dataset") {
    CHECK(decode_dataset(encode_dataset({})).empty());
  }
  SUBCASE("malformed files") {
    const SkeletalSequence s(random_tensor(3, 2, 3, 5), SkeletonTopology::chain(2), 0);
    const std::string good = encode_dataset({s});
    std::string bad = good;
    bad.replace(0, 4, "XXXX");
    CHECK_THROWS_WITH_AS(decode_dataset(bad), doctest::Contains("bad magic"), Error);
    CHECK_THROWS_AS(decode_dataset(good.substr(0, good.size() - 1)), Error);
    CHECK_THROWS_AS(decode_dataset(good.substr(0, 10)), Error);
    CHECK_THROWS_AS(decode_dataset(good + "x"), Error);
    std::string version = good;
    version[4] = 2;
    CHECK_THROWS_AS(decode_dataset(version), Error);
    std::string nan = good;
    const float q = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(nan.data() + 28, &q, 4);
    CHECK_THROWS_WITH_AS(decode_dataset(nan), doctest::Contains("non-finite"), Error);
  }
  SUBCASE("atomic write leaves no temporary") {
    TempDir dir("atomic");
    write_dataset(dir.file("d.skel"), {});
    std::size_t files = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++files;
    CHECK(files == 1);
  }
}
