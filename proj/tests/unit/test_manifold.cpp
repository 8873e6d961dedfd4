#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "skelattack/error.hpp"
#include "skelattack/manifold.hpp"
#include "support.hpp"

using namespace skelattack;
using skelattack::testing::TempDir;

namespace {

std::vector<Embedding> gaussian_points(std::size_t n, Eigen::Index dim, std::uint64_t seed,
                                       double spread = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, spread);
  std::vector<Embedding> out;
  for (std::size_t i = 0; i < n; ++i) {
    Embedding v(dim);
    for (auto& x : v) x = normal(rng);
    out.push_back(v);
  }
  return out;
}

Embedding vec2(double x, double y) {
  Embedding v(2);
  v << x, y;
  return v;
}

// Unit vector at cosine `c` to e1 in the plane.
Embedding at_cosine(double c) { return vec2(c, std::sqrt(1.0 - c * c)); }

}  // namespace

TEST_CASE("K points in K clusters") {
  auto points = gaussian_points(5, 4, 1);
  for (auto& p : points) p.normalize();
  const ManifoldIndex index = kmeans(points, KMeansConfig{5, 50, 3});
  REQUIRE(index.cluster_count() == 5);
  CHECK(index.wcss_trace.back() < 1e-20);
  std::set<std::size_t> used(index.assignments.begin(), index.assignments.end());
  CHECK(used.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK((index.centers[index.assignments[i]] - points[i]).norm() < 1e-12);
  }
}

TEST_CASE("well separated blobs are recovered") {
  const Eigen::Index dim = 6;
  std::vector<Embedding> points;
  std::vector<int> truth;
  for (int b = 0; b < 3; ++b) {
    Embedding centre = Embedding::Zero(dim);
    centre(b) = 10.0;
    for (const auto& noise : gaussian_points(20, dim, 10 + b, 0.1)) {
      points.push_back(centre + noise);
      truth.push_back(b);
    }
  }
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ManifoldIndex index = kmeans(points, KMeansConfig{3, 100, seed});
    for (std::size_t i = 0; i < points.size(); ++i) {
      for (std::size_t j = 0; j < points.size(); ++j) {
        if (truth[i] == truth[j]) CHECK(index.assignments[i] == index.assignments[j]);
        else CHECK(index.assignments[i] != index.assignments[j]);
      }
    }
    for (const auto& c : index.centers) CHECK(std::abs(c.norm() - 1.0) < 1e-12);
  }
}

TEST_CASE("duplicating the data keeps the centres") {
  std::vector<Embedding> points;
  for (int b = 0; b < 4; ++b) {
    Embedding centre = Embedding::Zero(5);
    centre(b) = 5.0;
    for (const auto& noise : gaussian_points(6, 5, 30 + b, 0.2)) points.push_back(centre + noise);
  }
  std::vector<Embedding> doubled = points;
  doubled.insert(doubled.end(), points.begin(), points.end());
  const ManifoldIndex a = kmeans(points, KMeansConfig{4, 100, 2});
  const ManifoldIndex b = kmeans(doubled, KMeansConfig{4, 100, 2});
  // Compare as sets: seeding may visit the clusters in another order.
  for (const auto& c : a.centers) {
    double best = 1e9;
    for (const auto& d : b.centers) best = std::min(best, (c - d).norm());
    CHECK(best < 1e-12);
  }
}

TEST_CASE("WCSS never increases") {
  const auto points = gaussian_points(200, 8, 4);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ManifoldIndex index = kmeans(points, KMeansConfig{12, 100, seed});
    REQUIRE_FALSE(index.wcss_trace.empty());
    for (std::size_t i = 1; i < index.wcss_trace.size(); ++i) {
      CHECK(index.wcss_trace[i] <= index.wcss_trace[i - 1] * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("determinism and errors") {
  const auto points = gaussian_points(40, 3, 6);
  const ManifoldIndex a = kmeans(points, KMeansConfig{4, 100, 9});
  const ManifoldIndex b = kmeans(points, KMeansConfig{4, 100, 9});
  CHECK(a.centers == b.centers);
  CHECK(a.assignments == b.assignments);
  CHECK_THROWS_WITH_AS(kmeans(gaussian_points(3, 3, 1), KMeansConfig{4, 10, 1}),
                       "K exceeds dataset size", Error);
  auto mixed = gaussian_points(4, 3, 1);
  mixed[2] = Embedding::Zero(2);
  CHECK_THROWS_AS(kmeans(mixed, KMeansConfig{2, 10, 1}), Error);
}

TEST_CASE("select_negatives") {
  ManifoldIndex index;
  index.centers = {at_cosine(0.1), at_cosine(0.9), at_cosine(-0.5)};
  const Embedding query = vec2(1.0, 0.0);

  SUBCASE("nearest centre is removed") {
    const auto negatives = select_negatives(index, query, 1);
    REQUIRE(negatives.size() == 2);
    for (const auto& n : negatives) CHECK(cosine_similarity(n, query) < 0.5);
    CHECK(negatives[0] == index.centers[0]);
    CHECK(negatives[1] == index.centers[2]);
  }
  SUBCASE("Q = 0 keeps every centre") {
    CHECK(select_negatives(index, query, 0).size() == 3);
  }
  SUBCASE("Q = K leaves nothing") {
    CHECK_THROWS_WITH_AS(select_negatives(index, query, 3), "no negatives remain", Error);
  }
  SUBCASE("ranking and ties") {
    CHECK(rank_centers(index, query) == std::vector<std::size_t>{1, 0, 2});
    ManifoldIndex tied;
    tied.centers = {vec2(0.0, 1.0), vec2(0.0, -1.0), vec2(1.0, 0.0)};
    CHECK(rank_centers(tied, query) == std::vector<std::size_t>{2, 0, 1});
    CHECK(select_negatives(tied, query, 2) == std::vector<Embedding>{tied.centers[1]});
  }
}

TEST_CASE("negatives never include the Q nearest centres") {
  auto centres = gaussian_points(16, 8, 21);
  for (auto& c : centres) c.normalize();
  ManifoldIndex index;
  index.centers = centres;
  for (const auto& q : gaussian_points(20, 8, 22)) {
    std::vector<double> sims;
    for (const auto& c : centres) sims.push_back(cosine_similarity(c, q));
    std::vector<double> sorted = sims;
    std::sort(sorted.rbegin(), sorted.rend());
    const auto negatives = select_negatives(index, q, 3);
    CHECK(negatives.size() == 13);
    for (const auto& n : negatives) CHECK(cosine_similarity(n, q) < sorted[2]);
  }
}

TEST_CASE("index file") {
  ManifoldIndex index = kmeans(gaussian_points(30, 4, 8), KMeansConfig{5, 100, 1});
  index.discard = 2;
  SUBCASE("round trip") {
    TempDir dir("manifold");
    write_manifold(dir.file("m.skmi"), index);
    const ManifoldIndex back = read_manifold(dir.file("m.skmi"));
    CHECK(back.centers == index.centers);
    CHECK(back.assignments == index.assignments);
    CHECK(back.discard == 2);
  }
  SUBCASE("layout") {
    const std::string bytes = encode_manifold(index);
    CHECK(bytes.size() == 24 + 5 * 4 * 8 + 30 * 4);
    CHECK(bytes.substr(0, 4) == "SKMI");
  }
  SUBCASE("damage") {
    const std::string bytes = encode_manifold(index);
    CHECK_THROWS_AS(decode_manifold(bytes.substr(0, bytes.size() - 1)), Error);
    CHECK_THROWS_AS(decode_manifold(bytes + "x"), Error);
    std::string bad = bytes;
    bad[0] = 'Q';
    CHECK_THROWS_AS(decode_manifold(bad), Error);
    std::string too_many = bytes;
    too_many[16] = 5;  // discard = K
    CHECK_THROWS_WITH_AS(decode_manifold(too_many), "no negatives remain", Error);
  }
}
