#include "skelattack/attack.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "skelattack/error.hpp"
#include "skelattack/smi.hpp"

namespace skelattack {

namespace {

struct StrategyInfo {
  Strategy strategy;
  std::string_view name;
  bool momentum;
  int order;
};

constexpr StrategyInfo kStrategies[] = {
    {Strategy::kIFgsm, "i-fgsm", false, 0},       {Strategy::kMiFgsm, "mi-fgsm", true, 0},
    {Strategy::kS1IFgsm, "s1i-fgsm", false, 1},   {Strategy::kS2IFgsm, "s2i-fgsm", false, 2},
    {Strategy::kS1MiFgsm, "s1mi-fgsm", true, 1},  {Strategy::kS2MiFgsm, "s2mi-fgsm", true, 2},
};

const StrategyInfo& info(Strategy s) {
  for (const auto& i : kStrategies) {
    if (i.strategy == s) return i;
  }
  throw Error("unknown strategy");
}

// Tolerance on the epsilon-ball check; clipping is exact in practice, this
// only absorbs rounding in S +/- epsilon.
constexpr double kBudgetSlack = 1e-12;

}  // namespace

std::string_view to_string(Strategy s) { return info(s).name; }

Strategy parse_strategy(std::string_view name) {
  for (const auto& i : kStrategies) {
    if (i.name == name) return i.strategy;
  }
  throw Error("unknown strategy '" + std::string(name) +
              "' (expected i-fgsm, mi-fgsm, s1i-fgsm, s2i-fgsm, s1mi-fgsm or s2mi-fgsm)");
}

bool uses_momentum(Strategy s) { return info(s).momentum; }
int dynamics_order(Strategy s) { return info(s).order; }

void AttackConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error("epsilon must be positive");
  const double a = step_size();
  if (!(a > 0.0) || a > epsilon) throw Error("alpha must satisfy 0 < alpha <= epsilon");
  if (iterations < 1) throw Error("iterations must be >= 1");
  if (!(momentum >= 0.0)) throw Error("momentum decay mu must be >= 0");
}

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double linf_distance(const Tensor3& a, const Tensor3& b) {
  if (!a.same_shape(b)) throw Error("shape mismatch");
  double m = 0.0;
  auto x = a.flat();
  auto y = b.flat();
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

LossAndGradient adversarial_loss_gradient(const Embedding& sample, const Embedding& positive,
                                          std::span<const Embedding> negatives) {
  if (negatives.empty()) throw Error("adversarial loss needs at least one negative");
  const double sample_norm = sample.norm();
  if (!(sample_norm > 0.0)) throw Error("adversarial loss on a zero embedding");

  // Similarities as cosines; u_j are the unit directions they are taken with.
  std::vector<Eigen::VectorXd> dirs;
  dirs.reserve(negatives.size() + 1);
  dirs.push_back(positive.normalized());
  for (const Embedding& n : negatives) dirs.push_back(n.normalized());
  const Eigen::VectorXd s_hat = sample / sample_norm;

  std::vector<double> sim(dirs.size());
  for (std::size_t i = 0; i < dirs.size(); ++i) sim[i] = s_hat.dot(dirs[i]);
  const double top = *std::max_element(sim.begin(), sim.end());
  double total = 0.0;
  for (double v : sim) total += std::exp(v - top);
  const double log_total = top + std::log(total);

  LossAndGradient out;
  out.loss = log_total - sim[0];
  // dL/dsim_i = p_i - [i == 0]; dsim_i/ds = (u_i - s_hat sim_i) / |s|
  Eigen::VectorXd d_shat = -dirs[0];
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    d_shat += std::exp(sim[i] - log_total) * dirs[i];
  }
  out.gradient = (d_shat - s_hat * s_hat.dot(d_shat)) / sample_norm;
  return out;
}

double adversarial_loss(const Embedding& sample, const Embedding& positive,
                        std::span<const Embedding> negatives) {
  return adversarial_loss_gradient(sample, positive, negatives).loss;
}

Tensor3 loss_input_gradient(const ReferenceEncoder& encoder, const Tensor3& frames,
                            const Embedding& positive, std::span<const Embedding> negatives,
                            double* loss) {
  Tensor3 gradient;
  encoder.forward_with_input_gradient(
      frames,
      [&](const Embedding& s) {
        const LossAndGradient lg = adversarial_loss_gradient(s, positive, negatives);
        if (!std::isfinite(lg.loss)) throw Error("adversarial loss is not finite");
        if (loss) *loss = lg.loss;
        return lg.gradient;
      },
      gradient);
  return gradient;
}

AttackRun iterate_sign_attack(const Tensor3& clean, const GradientOracle& oracle,
                              const AttackConfig& config, const TvarCoefficients* dynamics,
                              const IterateObserver& observer) {
  config.validate();
  const int order = dynamics_order(config.strategy);
  if (order > 0 && (dynamics == nullptr || dynamics->order() != order)) {
    throw Error(std::string(to_string(config.strategy)) + " needs TV-AR(" +
                std::to_string(order) + ") coefficients");
  }
  const bool momentum = uses_momentum(config.strategy);
  const double alpha = config.step_size();
  const double eps = config.epsilon;

  AttackRun run;
  run.original = clean;
  run.adversarial = clean;
  run.momentum = Tensor3(clean.frames(), clean.joints(), clean.channels());
  Tensor3 raw(clean.frames(), clean.joints(), clean.channels());

  auto clean_v = clean.flat();
  for (int i = 0; i < config.iterations; ++i) {
    if (observer) observer(i, run.adversarial);
    const double loss = oracle(run.adversarial, raw);
    if (!std::isfinite(loss)) throw Error("adversarial loss became non-finite");
    run.loss_trace.push_back(loss);

    Tensor3 direction = order == 1   ? smi_first_order(raw, *dynamics)
                        : order == 2 ? smi_second_order(raw, *dynamics)
                                     : raw;
    if (momentum) {
      double l1 = 0.0;
      for (double v : direction.flat()) l1 += std::abs(v);
      auto g = run.momentum.flat();
      auto d = direction.flat();
      for (std::size_t k = 0; k < g.size(); ++k) {
        g[k] = config.momentum * g[k] + (l1 > 0.0 ? d[k] / l1 : 0.0);
      }
      direction = run.momentum;
    }

    auto x = run.adversarial.flat();
    auto d = direction.flat();
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double stepped = x[k] + alpha * sign_of(d[k]);
      x[k] = std::clamp(stepped, clean_v[k] - eps, clean_v[k] + eps);
      if (std::abs(x[k] - clean_v[k]) > eps + kBudgetSlack) {
        throw std::logic_error("iterate left the epsilon ball");
      }
    }
  }
  if (observer) observer(config.iterations, run.adversarial);
  Tensor3 unused(clean.frames(), clean.joints(), clean.channels());
  run.loss_trace.push_back(oracle(run.adversarial, unused));
  run.max_deviation = linf_distance(run.adversarial, clean);
  return run;
}

AttackRun run_attack(const ReferenceEncoder& encoder, const ManifoldIndex& index,
                     const SkeletalSequence& sequence, const AttackConfig& config,
                     const IterateObserver& observer) {
  config.validate();
  const Tensor3& clean = sequence.frames();
  const Embedding positive = encoder.forward(clean);
  const std::vector<Embedding> negatives = select_negatives(index, positive, index.discard);

  std::optional<TvarCoefficients> dynamics;
  if (const int order = dynamics_order(config.strategy); order > 0) {
    dynamics = fit_tvar(order, clean, config.tvar);
  }
  const GradientOracle oracle = [&](const Tensor3& point, Tensor3& gradient) {
    double loss = 0.0;
    gradient = loss_input_gradient(encoder, point, positive, negatives, &loss);
    return loss;
  };
  return iterate_sign_attack(clean, oracle, config, dynamics ? &*dynamics : nullptr, observer);
}

Tensor3 round_to_float_within(const Tensor3& adversarial, const Tensor3& clean,
                              double epsilon) {
  if (!adversarial.same_shape(clean)) throw Error("adversarial and clean shapes differ");
  Tensor3 out = adversarial;
  auto a = out.flat();
  auto c = clean.flat();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto anchor = static_cast<float>(c[i]);
    if (static_cast<double>(anchor) != c[i]) {
      throw Error("clean coordinates are not float-representable");
    }
    float v = static_cast<float>(a[i]);
    while (std::abs(static_cast<double>(v) - c[i]) > epsilon) v = std::nextafter(v, anchor);
    a[i] = static_cast<double>(v);
  }
  return out;
}

}  // namespace skelattack
