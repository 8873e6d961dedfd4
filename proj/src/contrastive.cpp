#include "skelattack/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>

#include "skelattack/error.hpp"

namespace skelattack {

InfoNceResult info_nce(const Embedding& query, const Embedding& key,
                       std::span<const Embedding> queue, double temperature) {
  if (!(temperature > 0.0)) throw Error("temperature must be positive");
  InfoNceResult result;
  result.query_gradient = Eigen::VectorXd::Zero(query.size());
  if (queue.empty()) return result;

  std::vector<double> logits(queue.size() + 1);
  logits[0] = query.dot(key) / temperature;
  for (std::size_t n = 0; n < queue.size(); ++n) {
    logits[n + 1] = query.dot(queue[n]) / temperature;
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double l : logits) total += std::exp(l - top);
  const double log_total = top + std::log(total);
  result.loss = log_total - logits[0];

  // dL/dq = ((p_0 - 1) k + sum_n p_n F_n) / tau
  result.query_gradient = (std::exp(logits[0] - log_total) - 1.0) * key;
  for (std::size_t n = 0; n < queue.size(); ++n) {
    result.query_gradient += std::exp(logits[n + 1] - log_total) * queue[n];
  }
  result.query_gradient /= temperature;
  return result;
}

double info_nce_loss(const Embedding& query, const Embedding& key,
                     std::span<const Embedding> queue, double temperature) {
  if (queue.empty() && temperature > 0.0) {
    std::cerr << "warning: InfoNCE with an empty queue is degenerate (loss 0)\n";
  }
  return info_nce(query, key, queue, temperature).loss;
}

void ContrastiveConfig::validate() const {
  if (!(temperature > 0.0)) throw Error("encoder.tau must be positive");
  if (queue_size == 0) throw Error("encoder.queue must be positive");
  if (!(momentum >= 0.0 && momentum <= 1.0)) throw Error("encoder.momentum must lie in [0, 1]");
  if (!(learning_rate >= 0.0)) throw Error("encoder.lr must be >= 0");
  if (!(weight_decay >= 0.0)) throw Error("encoder.weight_decay must be >= 0");
  if (epochs < 0) throw Error("encoder.epochs must be >= 0");
  if (hidden == 0 || embedding_dim == 0) throw Error("encoder dimensions must be positive");
}

ContrastiveTrainer::ContrastiveTrainer(ContrastiveConfig config, ReferenceEncoder query)
    : config_(config), query_(query), key_(std::move(query)) {
  config_.validate();
}

ContrastiveTrainer::ContrastiveTrainer(ContrastiveConfig config,
                                       const SkeletonTopology& topology, std::size_t channels)
    : ContrastiveTrainer(config, ReferenceEncoder::initialize(topology, channels, config.hidden,
                                                              config.embedding_dim,
                                                              config.seed)) {}

void ContrastiveTrainer::momentum_update() {
  EncoderParameters& k = key_.mutable_parameters();
  k.scale(config_.momentum);
  k.axpy(1.0 - config_.momentum, query_.parameters());
}

void ContrastiveTrainer::push_key(const Embedding& key) {
  queue_.push_back(key);
  while (queue_.size() > config_.queue_size) queue_.pop_front();
}

double ContrastiveTrainer::step(const Tensor3& query_view, const Tensor3& key_view) {
  const Embedding q = query_.forward(query_view);
  const Embedding k = key_.forward(key_view);
  const std::vector<Embedding> negatives(queue_.begin(), queue_.end());
  const InfoNceResult nce = info_nce(q, k, negatives, config_.temperature);
  if (!std::isfinite(nce.loss)) throw Error("contrastive training diverged (non-finite loss)");

  if (config_.learning_rate > 0.0) {
    EncoderParameters grad = query_.parameter_gradient(query_view, nce.query_gradient);
    EncoderParameters& p = query_.mutable_parameters();
    grad.axpy(config_.weight_decay, p);
    p.axpy(-config_.learning_rate, grad);
    if (!p.all_finite()) throw Error("contrastive training diverged (non-finite parameters)");
  }
  momentum_update();
  push_key(k);
  losses_.push_back(nce.loss);
  return nce.loss;
}

const ReferenceEncoder& ContrastiveTrainer::train(const std::vector<SkeletalSequence>& data,
                                                  const AugmentationConfig& augmentation) {
  if (data.empty()) throw Error("contrastive training needs at least one sequence");
  augmentation.validate();
  std::mt19937_64 rng(augmentation.seed ^ (config_.seed * 0x9E3779B97F4A7C15ULL));

  if (config_.warm_start_queue) {
    for (std::size_t i = 0; queue_.size() < config_.queue_size; ++i) {
      const Tensor3& x = data[i % data.size()].frames();
      push_key(key_.forward(augment(x, augmentation, rng)));
    }
  }

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      const Tensor3& x = data[i].frames();
      const Tensor3 query_view = augment(x, augmentation, rng);
      const Tensor3 key_view = augment(x, augmentation, rng);
      step(query_view, key_view);
    }
  }
  return query_;
}

ContrastiveDiagnostics contrastive_diagnostics(const ContrastiveTrainer& trainer,
                                               const std::vector<SkeletalSequence>& data,
                                               const AugmentationConfig& augmentation,
                                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ContrastiveDiagnostics out;
  std::size_t negatives = 0;
  for (const SkeletalSequence& seq : data) {
    const Embedding q = trainer.query_encoder().forward(augment(seq.frames(), augmentation, rng));
    const Embedding k = trainer.key_encoder().forward(augment(seq.frames(), augmentation, rng));
    out.positive_similarity += q.dot(k);
    for (const Embedding& f : trainer.queue()) {
      out.negative_similarity += q.dot(f);
      ++negatives;
    }
  }
  out.positive_similarity /= static_cast<double>(data.size());
  if (negatives > 0) out.negative_similarity /= static_cast<double>(negatives);
  return out;
}

}  // namespace skelattack
