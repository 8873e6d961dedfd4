#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "skelattack/dynamics.hpp"
#include "skelattack/encoder.hpp"
#include "skelattack/manifold.hpp"
#include "skelattack/motion.hpp"

namespace skelattack {

enum class Strategy { kIFgsm, kMiFgsm, kS1IFgsm, kS2IFgsm, kS1MiFgsm, kS2MiFgsm };

inline constexpr Strategy kAllStrategies[] = {Strategy::kIFgsm,    Strategy::kMiFgsm,
                                              Strategy::kS1IFgsm,  Strategy::kS2IFgsm,
                                              Strategy::kS1MiFgsm, Strategy::kS2MiFgsm};

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view name);  // "i-fgsm", "s2mi-fgsm", ...

bool uses_momentum(Strategy s);
// 0 for the plain gradient, otherwise the SMI order.
int dynamics_order(Strategy s);

struct AttackConfig {
  Strategy strategy = Strategy::kS2MiFgsm;
  double epsilon = 0.01;
  // Step size; unset means epsilon / 50.
  std::optional<double> alpha;
  int iterations = 400;
  double momentum = 1.0;
  TvarFitOptions tvar;

  double step_size() const { return alpha.value_or(epsilon / 50.0); }
  void validate() const;
};

// Hard no-box loss over cosine similarities:
//   L = -log( exp(sim(s, p)) / (exp(sim(s, p)) + sum_j exp(sim(s, n_j))) )
// where p is the clean sample's embedding and n_j the negative centres.
// The attack maximises L.
double adversarial_loss(const Embedding& sample, const Embedding& positive,
                        std::span<const Embedding> negatives);

struct LossAndGradient {
  double loss = 0.0;
  Eigen::VectorXd gradient;  // dL/d(sample)
};
LossAndGradient adversarial_loss_gradient(const Embedding& sample, const Embedding& positive,
                                          std::span<const Embedding> negatives);

// Gradient of adversarial_loss(encoder.forward(frames), ...) w.r.t. frames.
Tensor3 loss_input_gradient(const ReferenceEncoder& encoder, const Tensor3& frames,
                            const Embedding& positive, std::span<const Embedding> negatives,
                            double* loss = nullptr);

struct AttackRun {
  Tensor3 original;
  Tensor3 adversarial;
  Tensor3 momentum;  // final accumulator (zeros for non-momentum strategies)
  // Loss at each iterate S^0 .. S^I (I + 1 entries).
  std::vector<double> loss_trace;
  double max_deviation = 0.0;  // l-infinity distance of the final iterate
};

// Returns the loss at `point` and writes dL/dpoint into `gradient`.
using GradientOracle = std::function<double(const Tensor3& point, Tensor3& gradient)>;
// Called with (i, S^i) for i = 0 .. I.
using IterateObserver = std::function<void(int, const Tensor3&)>;

// The projected sign-ascent loop shared by all strategies. `dynamics` must be
// set (and of matching order) exactly when the strategy uses SMI gradients.
// Throws std::logic_error if an iterate ever leaves the epsilon ball.
AttackRun iterate_sign_attack(const Tensor3& clean, const GradientOracle& oracle,
                              const AttackConfig& config, const TvarCoefficients* dynamics,
                              const IterateObserver& observer = {});

// Full no-box attack on one sequence. Labels on `sequence` are ignored.
AttackRun run_attack(const ReferenceEncoder& encoder, const ManifoldIndex& index,
                     const SkeletalSequence& sequence, const AttackConfig& config,
                     const IterateObserver& observer = {});

// Elementwise sign with sign(0) = 0.
double sign_of(double v);

double linf_distance(const Tensor3& a, const Tensor3& b);

// Rounds `adversarial` to float precision for storage. A coordinate whose
// rounded value would leave the epsilon ball around `clean` is moved one
// float step back towards it. `clean` must itself be float-representable.
Tensor3 round_to_float_within(const Tensor3& adversarial, const Tensor3& clean, double epsilon);

}  // namespace skelattack
