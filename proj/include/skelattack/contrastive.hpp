#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "skelattack/augment.hpp"
#include "skelattack/encoder.hpp"
#include "skelattack/motion.hpp"

namespace skelattack {

struct InfoNceResult {
  double loss = 0.0;
  Eigen::VectorXd query_gradient;  // dL/dq; the key is treated as a constant
};

// -log( exp(q.k/tau) / (exp(q.k/tau) + sum_n exp(q.F_n/tau)) ).
// An empty queue gives the degenerate value 0 (and a zero gradient).
double info_nce_loss(const Embedding& query, const Embedding& key,
                     std::span<const Embedding> queue, double temperature);
InfoNceResult info_nce(const Embedding& query, const Embedding& key,
                       std::span<const Embedding> queue, double temperature);

struct ContrastiveConfig {
  double temperature = 0.07;
  std::size_t queue_size = 1024;
  double momentum = 0.999;
  double learning_rate = 0.01;
  double weight_decay = 1e-4;
  int epochs = 50;
  std::size_t hidden = 64;
  std::size_t embedding_dim = 32;
  std::uint64_t seed = 3;
  // Fill the queue with key embeddings of augmented samples before the first
  // step, so the loss is measured against a full queue from the start.
  bool warm_start_queue = true;

  void validate() const;
};

// Momentum contrast: the query encoder is trained by SGD on InfoNCE against a
// FIFO queue of past keys; the key encoder tracks it by exponential moving
// average.
class ContrastiveTrainer {
 public:
  ContrastiveTrainer(ContrastiveConfig config, ReferenceEncoder query);
  // Fresh query encoder from config.seed; key encoder starts as a copy.
  ContrastiveTrainer(ContrastiveConfig config, const SkeletonTopology& topology,
                     std::size_t channels);

  // Runs config.epochs passes over `data` (labels are ignored). Returns the
  // trained query encoder. Throws Error if the loss becomes non-finite.
  const ReferenceEncoder& train(const std::vector<SkeletalSequence>& data,
                                const AugmentationConfig& augmentation);

  // One contrastive step on a pair of views; returns the loss.
  double step(const Tensor3& query_view, const Tensor3& key_view);

  // key = m * key + (1 - m) * query
  void momentum_update();
  void push_key(const Embedding& key);

  const ReferenceEncoder& query_encoder() const { return query_; }
  const ReferenceEncoder& key_encoder() const { return key_; }
  const std::deque<Embedding>& queue() const { return queue_; }
  const std::vector<double>& loss_trace() const { return losses_; }
  const ContrastiveConfig& config() const { return config_; }

 private:
  ContrastiveConfig config_;
  ReferenceEncoder query_;
  ReferenceEncoder key_;
  std::deque<Embedding> queue_;
  std::vector<double> losses_;
};

struct ContrastiveDiagnostics {
  double positive_similarity = 0.0;  // mean cos(q, k) over augmented pairs
  double negative_similarity = 0.0;  // mean cos(q, F_n) over queue entries
};

// Evaluates both means on one fresh pair of views per sequence.
ContrastiveDiagnostics contrastive_diagnostics(const ContrastiveTrainer& trainer,
                                               const std::vector<SkeletalSequence>& data,
                                               const AugmentationConfig& augmentation,
                                               std::uint64_t seed);

}  // namespace skelattack
