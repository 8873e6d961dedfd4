#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "skelattack/encoder.hpp"

namespace skelattack {

// K-means structure of the embedded attack set. Centres are unit length.
struct ManifoldIndex {
  std::vector<Embedding> centers;
  std::vector<std::size_t> assignments;
  // Default number of nearest centres to discard when selecting negatives.
  std::size_t discard = 2;
  // Within-cluster sum of squares after each Lloyd iteration (before the
  // final renormalisation).
  std::vector<double> wcss_trace;

  std::size_t cluster_count() const { return centers.size(); }
};

struct KMeansConfig {
  std::size_t clusters = 16;
  int max_iters = 100;
  std::uint64_t seed = 5;
};

// Lloyd iterations from k-means++ seeding in Euclidean space, until the
// assignment stops changing or max_iters. Empty clusters keep their previous
// centre. Centres are L2-normalised at the end.
ManifoldIndex kmeans(std::span<const Embedding> points, const KMeansConfig& config);

// Embeds every sequence with `encoder` and clusters the embeddings.
ManifoldIndex build_manifold(const ReferenceEncoder& encoder,
                             std::span<const Tensor3> sequences, const KMeansConfig& config,
                             std::size_t discard);

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Centre indices ordered by cosine similarity to `query`, most similar first;
// ties go to the lower index.
std::vector<std::size_t> rank_centers(const ManifoldIndex& index, const Embedding& query);

// All centres except the `discard` most similar to `query`.
std::vector<Embedding> select_negatives(const ManifoldIndex& index, const Embedding& query,
                                        std::size_t discard);

// Index file layout (little-endian):
//   "SKMI" | u32 version | u32 K | u32 D | u32 discard | u32 point_count
//   K*D f64 centres | point_count u32 assignments
std::string encode_manifold(const ManifoldIndex& index);
ManifoldIndex decode_manifold(const std::string& bytes);
void write_manifold(const std::filesystem::path& path, const ManifoldIndex& index);
ManifoldIndex read_manifold(const std::filesystem::path& path);

}  // namespace skelattack
