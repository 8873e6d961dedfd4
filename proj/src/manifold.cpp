#include "skelattack/manifold.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "skelattack/binary_io.hpp"
#include "skelattack/error.hpp"

namespace skelattack {

namespace {

constexpr char kMagic[] = "SKMI";
constexpr std::uint32_t kVersion = 1;

std::size_t nearest(const std::vector<Eigen::VectorXd>& centers, const Eigen::VectorXd& x,
                    double* distance) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < centers.size(); ++k) {
    const double d = (x - centers[k]).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  if (distance) *distance = best_d;
  return best;
}

std::vector<Eigen::VectorXd> seed_plus_plus(std::span<const Embedding> points, std::size_t k,
                                            std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n = points.size();
  std::vector<bool> chosen(n, false);
  std::vector<Eigen::VectorXd> centers;
  auto first = std::min(static_cast<std::size_t>(unit(rng) * static_cast<double>(n)), n - 1);
  centers.push_back(points[first]);
  chosen[first] = true;

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = (points[i] - centers[0]).squaredNorm();
  while (centers.size() < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (d2[i] > 0.0 && acc > target) {
          pick = i;
          break;
        }
      }
      if (pick == n) {
        // Rounding left the target past the final sum; take the last
        // candidate with positive weight.
        for (std::size_t i = n; i-- > 0;) {
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      // Fewer distinct points than clusters: reuse the lowest unused index.
      pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), false) -
                                      chosen.begin());
    }
    chosen[pick] = true;
    centers.push_back(points[pick]);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (points[i] - centers.back()).squaredNorm());
    }
  }
  return centers;
}

}  // namespace

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double denom = a.norm() * b.norm();
  if (denom == 0.0) return 0.0;
  return a.dot(b) / denom;
}

ManifoldIndex kmeans(std::span<const Embedding> points, const KMeansConfig& config) {
  const std::size_t k = config.clusters;
  if (k < 2) throw Error("K must be at least 2");
  if (points.size() < k) throw Error("K exceeds dataset size");
  const auto dim = points.front().size();
  for (const Embedding& p : points) {
    if (p.size() != dim) throw Error("embeddings have inconsistent dimensions");
    if (!p.allFinite()) throw Error("embedding contains non-finite values");
  }

  std::mt19937_64 rng(config.seed);
  ManifoldIndex index;
  std::vector<Eigen::VectorXd> centers = seed_plus_plus(points, k, rng);
  std::vector<std::size_t> assignment(points.size(), k);

  for (int iter = 0; iter < std::max(config.max_iters, 1); ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const std::size_t a = nearest(centers, points[i], nullptr);
      changed |= a != assignment[i];
      assignment[i] = a;
    }
    if (!changed) break;

    std::vector<Eigen::VectorXd> sums(k, Eigen::VectorXd::Zero(dim));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      sums[assignment[i]] += points[i];
      ++counts[assignment[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) centers[c] = sums[c] / static_cast<double>(counts[c]);
    }
    double wcss = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      wcss += (points[i] - centers[assignment[i]]).squaredNorm();
    }
    index.wcss_trace.push_back(wcss);
  }

  for (Eigen::VectorXd& c : centers) {
    const double norm = c.norm();
    if (norm > 0.0) c /= norm;
  }
  index.centers = std::move(centers);
  index.assignments = std::move(assignment);
  return index;
}

ManifoldIndex build_manifold(const ReferenceEncoder& encoder,
                             std::span<const Tensor3> sequences, const KMeansConfig& config,
                             std::size_t discard) {
  std::vector<Embedding> embeddings;
  embeddings.reserve(sequences.size());
  for (const Tensor3& x : sequences) embeddings.push_back(encoder.forward(x));
  ManifoldIndex index = kmeans(embeddings, config);
  if (discard >= index.cluster_count()) throw Error("no negatives remain");
  index.discard = discard;
  return index;
}

std::vector<std::size_t> rank_centers(const ManifoldIndex& index, const Embedding& query) {
  std::vector<double> sim(index.centers.size());
  for (std::size_t k = 0; k < sim.size(); ++k) {
    sim[k] = cosine_similarity(index.centers[k], query);
  }
  std::vector<std::size_t> order(sim.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sim[a] > sim[b]; });
  return order;
}

std::vector<Embedding> select_negatives(const ManifoldIndex& index, const Embedding& query,
                                        std::size_t discard) {
  if (discard >= index.cluster_count()) throw Error("no negatives remain");
  const std::vector<std::size_t> order = rank_centers(index, query);
  std::vector<std::size_t> kept(order.begin() + static_cast<std::ptrdiff_t>(discard),
                                order.end());
  // Return in centre-index order so the result does not depend on ranking ties.
  std::sort(kept.begin(), kept.end());
  std::vector<Embedding> out;
  out.reserve(kept.size());
  for (std::size_t k : kept) out.push_back(index.centers[k]);
  return out;
}

std::string encode_manifold(const ManifoldIndex& index) {
  if (index.centers.empty()) throw Error("cannot write an empty manifold index");
  std::ostringstream out(std::ios::binary);
  const auto dim = static_cast<std::uint32_t>(index.centers.front().size());
  io::write_tag(out, kMagic);
  io::write_u32(out, kVersion);
  io::write_u32(out, static_cast<std::uint32_t>(index.centers.size()));
  io::write_u32(out, dim);
  io::write_u32(out, static_cast<std::uint32_t>(index.discard));
  io::write_u32(out, static_cast<std::uint32_t>(index.assignments.size()));
  for (const Embedding& c : index.centers) {
    for (Eigen::Index i = 0; i < c.size(); ++i) io::write_f64(out, c(i));
  }
  for (std::size_t a : index.assignments) io::write_u32(out, static_cast<std::uint32_t>(a));
  return out.str();
}

ManifoldIndex decode_manifold(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  io::expect_tag(in, kMagic);
  if (io::read_u32(in, "version") != kVersion) throw Error("unsupported manifold version");
  const std::uint32_t k = io::read_u32(in, "cluster count");
  const std::uint32_t dim = io::read_u32(in, "dimension");
  const std::uint32_t discard = io::read_u32(in, "discard count");
  const std::uint32_t points = io::read_u32(in, "point count");
  if (k < 2) throw Error("manifold index needs K >= 2");
  if (std::uint64_t{k} * dim * 8 + std::uint64_t{points} * 4 > bytes.size()) {
    throw Error("truncated file while reading manifold index");
  }
  ManifoldIndex index;
  index.discard = discard;
  for (std::uint32_t c = 0; c < k; ++c) {
    Embedding v(dim);
    for (std::uint32_t i = 0; i < dim; ++i) v(i) = io::read_f64(in, "centers");
    if (!v.allFinite()) throw Error("manifold centre is not finite");
    index.centers.push_back(std::move(v));
  }
  for (std::uint32_t i = 0; i < points; ++i) {
    const std::uint32_t a = io::read_u32(in, "assignments");
    if (a >= k) throw Error("manifold assignment out of range");
    index.assignments.push_back(a);
  }
  if (discard >= k) throw Error("no negatives remain");
  if (in.peek() != std::char_traits<char>::eof()) throw Error("trailing bytes in manifold index");
  return index;
}

void write_manifold(const std::filesystem::path& path, const ManifoldIndex& index) {
  io::write_file_atomic(path, encode_manifold(index));
}

ManifoldIndex read_manifold(const std::filesystem::path& path) {
  return decode_manifold(io::read_file(path));
}

}  // namespace skelattack
