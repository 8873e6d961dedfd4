#include "skelattack/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "skelattack/error.hpp"
#include "skelattack/parallel.hpp"

namespace skelattack {

namespace {

Eigen::Map<const Eigen::VectorXd> flat_vector(const Tensor3& x) {
  return {x.flat().data(), static_cast<Eigen::Index>(x.size())};
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

Eigen::MatrixXd gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                         double stddev) {
  std::normal_distribution<double> normal(0.0, stddev);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

// One SGD step on a single labelled sample.
void sgd_step(VictimClassifier::EncoderHead& m, const Tensor3& x, int label, double lr) {
  const Embedding emb = m.encoder.forward(x);
  Eigen::VectorXd d_logits = softmax(m.head * emb + m.bias);
  d_logits(label) -= 1.0;
  const Eigen::VectorXd d_emb = m.head.transpose() * d_logits;
  const EncoderParameters g = m.encoder.parameter_gradient(x, d_emb);
  m.head -= lr * d_logits * emb.transpose();
  m.bias -= lr * d_logits;
  m.encoder.mutable_parameters().axpy(-lr, g);
}

void sgd_step(VictimClassifier::FrameMlp& m, const Tensor3& x, int label, double lr) {
  const auto in = flat_vector(x);
  const Eigen::VectorXd h = (m.w1 * in + m.b1).array().tanh();
  Eigen::VectorXd d_logits = softmax(m.w2 * h + m.b2);
  d_logits(label) -= 1.0;
  const Eigen::VectorXd d_h =
      ((m.w2.transpose() * d_logits).array() * (1.0 - h.array().square())).matrix();
  m.w2 -= lr * d_logits * h.transpose();
  m.b2 -= lr * d_logits;
  m.w1 -= lr * d_h * in.transpose();
  m.b1 -= lr * d_h;
}

}  // namespace

std::string_view to_string(VictimKind kind) {
  return kind == VictimKind::kEncoderHead ? "encoder-head" : "frame-mlp";
}

VictimKind parse_victim_kind(std::string_view name) {
  if (name == "encoder-head") return VictimKind::kEncoderHead;
  if (name == "frame-mlp") return VictimKind::kFrameMlp;
  throw Error("unknown victim kind '" + std::string(name) +
              "' (expected encoder-head or frame-mlp)");
}

VictimClassifier::VictimClassifier(EncoderHead model, std::size_t class_count)
    : model_(std::move(model)), classes_(class_count) {}
VictimClassifier::VictimClassifier(FrameMlp model, std::size_t class_count)
    : model_(std::move(model)), classes_(class_count) {}

VictimKind VictimClassifier::kind() const {
  return std::holds_alternative<EncoderHead>(model_) ? VictimKind::kEncoderHead
                                                     : VictimKind::kFrameMlp;
}

Eigen::VectorXd VictimClassifier::logits(const Tensor3& frames) const {
  if (const auto* m = std::get_if<EncoderHead>(&model_)) {
    return m->head * m->encoder.forward(frames) + m->bias;
  }
  const auto& m = std::get<FrameMlp>(model_);
  if (static_cast<Eigen::Index>(frames.size()) != m.w1.cols()) {
    throw Error("frame-mlp victim expects " + std::to_string(m.frames) + " frames of " +
                std::to_string(m.w1.cols() / static_cast<Eigen::Index>(m.frames)) +
                " values");
  }
  const Eigen::VectorXd h = (m.w1 * flat_vector(frames) + m.b1).array().tanh();
  return m.w2 * h + m.b2;
}

int VictimClassifier::predict(const Tensor3& frames) const {
  Eigen::Index best = 0;
  logits(frames).maxCoeff(&best);
  return static_cast<int>(best);
}

bool operator==(const VictimClassifier& a, const VictimClassifier& b) {
  if (a.classes_ != b.classes_ || a.model_.index() != b.model_.index()) return false;
  if (const auto* x = std::get_if<VictimClassifier::EncoderHead>(&a.model_)) {
    const auto& y = std::get<VictimClassifier::EncoderHead>(b.model_);
    return x->encoder.parameters() == y.encoder.parameters() && x->head == y.head &&
           x->bias == y.bias;
  }
  const auto& x = std::get<VictimClassifier::FrameMlp>(a.model_);
  const auto& y = std::get<VictimClassifier::FrameMlp>(b.model_);
  return x.frames == y.frames && x.w1 == y.w1 && x.b1 == y.b1 && x.w2 == y.w2 && x.b2 == y.b2;
}

VictimClassifier train_victim(VictimKind kind, const std::vector<SkeletalSequence>& data,
                              const VictimTrainConfig& config) {
  if (data.empty()) throw Error("victim training needs data");
  std::set<int> labels;
  for (const SkeletalSequence& s : data) {
    if (!s.label()) throw Error("victim training needs labelled sequences");
    labels.insert(*s.label());
  }
  if (labels.size() < 2) throw Error("victim training needs at least 2 classes");
  if (!(config.learning_rate >= 0.0) || config.epochs < 0) {
    throw Error("invalid victim training configuration");
  }
  const auto classes = static_cast<std::size_t>(*labels.rbegin() + 1);
  const Tensor3& first = data.front().frames();
  std::mt19937_64 rng(config.seed);
  const auto k = static_cast<Eigen::Index>(classes);
  const auto h = static_cast<Eigen::Index>(config.hidden);

  VictimClassifier victim = [&]() {
    if (kind == VictimKind::kEncoderHead) {
      VictimClassifier::EncoderHead m{
          ReferenceEncoder::initialize(data.front().topology(), first.channels(), config.hidden,
                                       config.embedding_dim, rng()),
          Eigen::MatrixXd(), Eigen::VectorXd::Zero(k)};
      m.head = gaussian(rng, k, static_cast<Eigen::Index>(config.embedding_dim), 1.0);
      return VictimClassifier(std::move(m), classes);
    }
    const auto n = static_cast<Eigen::Index>(first.size());
    for (const SkeletalSequence& s : data) {
      if (!s.frames().same_shape(first)) {
        throw Error("frame-mlp victim needs sequences of identical shape");
      }
    }
    VictimClassifier::FrameMlp m{first.frames(),
                                 gaussian(rng, h, n, 1.0 / std::sqrt(static_cast<double>(n))),
                                 Eigen::VectorXd::Zero(h),
                                 gaussian(rng, k, h, 1.0 / std::sqrt(static_cast<double>(h))),
                                 Eigen::VectorXd::Zero(k)};
    return VictimClassifier(std::move(m), classes);
  }();

  if (config.learning_rate > 0.0) {
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t i : order) {
        std::visit([&](auto& m) { sgd_step(m, data[i].frames(), *data[i].label(),
                                           config.learning_rate); },
                   victim.mutable_model());
      }
    }
  }
  victim.set_train_accuracy(accuracy(victim, data));
  return victim;
}

double accuracy(const VictimClassifier& victim, const std::vector<SkeletalSequence>& data) {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (const SkeletalSequence& s : data) {
    if (s.label() && victim.predict(s.frames()) == *s.label()) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

double fooling_rate(const VictimClassifier& victim, std::span<const Tensor3> clean,
                    std::span<const Tensor3> adversarial, int jobs) {
  if (clean.size() != adversarial.size()) {
    throw Error("clean and adversarial sets differ in length");
  }
  if (clean.empty()) throw Error("fooling rate needs at least one sample");
  std::vector<char> changed(clean.size(), 0);
  parallel_for(clean.size(), jobs, [&](std::size_t i) {
    changed[i] = victim.predict(clean[i]) != victim.predict(adversarial[i]);
  });
  const auto flipped = static_cast<std::size_t>(std::count(changed.begin(), changed.end(), 1));
  return static_cast<double>(flipped) / static_cast<double>(clean.size());
}

PerceptualReport perceptual_deviation(std::span<const Tensor3> clean,
                                      std::span<const Tensor3> adversarial,
                                      const SkeletonTopology& topology) {
  if (clean.size() != adversarial.size()) {
    throw Error("clean and adversarial sets differ in length");
  }
  if (clean.empty()) throw Error("perceptual deviation needs at least one sample");
  const Tensor3& ref = clean.front();
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (!clean[i].same_shape(ref) || !adversarial[i].same_shape(ref)) {
      throw Error("perceptual deviation needs sequences of identical shape");
    }
  }

  auto frame_norm_sum = [](const Tensor3& a, const Tensor3& b) {
    double total = 0.0;
    for (std::size_t t = 0; t < a.frames(); ++t) {
      auto x = a.frame(t);
      auto y = b.frame(t);
      double sq = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) sq += (x[k] - y[k]) * (x[k] - y[k]);
      total += std::sqrt(sq);
    }
    return total;
  };

  PerceptualReport r;
  r.samples = clean.size();
  r.frames = ref.frames();
  r.joints = ref.joints();
  for (std::size_t i = 0; i < clean.size(); ++i) {
    r.position_term += frame_norm_sum(clean[i], adversarial[i]);
    r.bone_term += frame_norm_sum(compute_bones(clean[i], topology),
                                  compute_bones(adversarial[i], topology));
    r.acceleration_term +=
        frame_norm_sum(second_difference(clean[i]), second_difference(adversarial[i]));
  }
  const double mt = static_cast<double>(r.samples * r.frames);
  r.position_term /= mt;
  r.bone_term /= mt;
  r.acceleration_term /= mt * static_cast<double>(r.joints);
  r.delta_p = r.position_term + r.bone_term + r.acceleration_term;
  return r;
}

}  // namespace skelattack
