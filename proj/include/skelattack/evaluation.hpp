#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "skelattack/encoder.hpp"
#include "skelattack/motion.hpp"

namespace skelattack {

enum class VictimKind { kEncoderHead, kFrameMlp };

std::string_view to_string(VictimKind kind);
VictimKind parse_victim_kind(std::string_view name);  // "encoder-head" | "frame-mlp"

struct VictimTrainConfig {
  int epochs = 60;
  double learning_rate = 0.05;
  std::size_t hidden = 64;
  std::size_t embedding_dim = 32;  // encoder-head only
  std::uint64_t seed = 17;
};

// Supervised desk-scale classifier used only to judge attacks. The attack
// pipeline never calls into it.
class VictimClassifier {
 public:
  // ReferenceEncoder followed by a linear head on the embedding.
  struct EncoderHead {
    ReferenceEncoder encoder;
    Eigen::MatrixXd head;  // K x D
    Eigen::VectorXd bias;  // K
  };
  // Flattened T*J*C input -> tanh hidden layer -> K logits. Fixed T.
  struct FrameMlp {
    std::size_t frames;
    Eigen::MatrixXd w1;  // H x (T*J*C)
    Eigen::VectorXd b1;  // H
    Eigen::MatrixXd w2;  // K x H
    Eigen::VectorXd b2;  // K
  };

  VictimClassifier(EncoderHead model, std::size_t class_count);
  VictimClassifier(FrameMlp model, std::size_t class_count);

  VictimKind kind() const;
  std::size_t class_count() const { return classes_; }
  Eigen::VectorXd logits(const Tensor3& frames) const;
  int predict(const Tensor3& frames) const;

  double train_accuracy() const { return train_accuracy_; }
  void set_train_accuracy(double a) { train_accuracy_ = a; }

  const std::variant<EncoderHead, FrameMlp>& model() const { return model_; }
  std::variant<EncoderHead, FrameMlp>& mutable_model() { return model_; }

  friend bool operator==(const VictimClassifier& a, const VictimClassifier& b);

 private:
  std::variant<EncoderHead, FrameMlp> model_;
  std::size_t classes_;
  double train_accuracy_ = 0.0;
};

// Per-sample SGD on softmax cross-entropy, shuffled each epoch. Requires
// labels on every sequence and at least two distinct classes.
VictimClassifier train_victim(VictimKind kind, const std::vector<SkeletalSequence>& data,
                              const VictimTrainConfig& config);

double accuracy(const VictimClassifier& victim, const std::vector<SkeletalSequence>& data);

// Fraction of aligned pairs whose predicted label differs. Predictions run
// on up to `jobs` threads.
double fooling_rate(const VictimClassifier& victim, std::span<const Tensor3> clean,
                    std::span<const Tensor3> adversarial, int jobs = 1);

struct PerceptualReport {
  double position_term = 0.0;
  double bone_term = 0.0;
  double acceleration_term = 0.0;
  double delta_p = 0.0;
  std::size_t samples = 0;  // M
  std::size_t frames = 0;   // T
  std::size_t joints = 0;   // L
};

// Position and bone terms: per-frame Euclidean norms of the difference
// summed over frames and samples, divided by M*T. Acceleration term: same
// over the T-2 second differences, divided by M*T*L. All samples must share
// T, J and C.
PerceptualReport perceptual_deviation(std::span<const Tensor3> clean,
                                      std::span<const Tensor3> adversarial,
                                      const SkeletonTopology& topology);

}  // namespace skelattack
