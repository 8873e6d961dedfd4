#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "skelattack/attack.hpp"
#include "skelattack/augment.hpp"
#include "skelattack/contrastive.hpp"
#include "skelattack/evaluation.hpp"
#include "skelattack/manifold.hpp"
#include "skelattack/motion.hpp"

namespace skelattack {

struct ManifoldSettings {
  KMeansConfig kmeans;
  std::size_t discard = 2;
};

struct EvalSettings {
  std::vector<std::string> victims{"encoder-head", "frame-mlp"};
  VictimTrainConfig train;
};

// Plain-text run configuration:
//
//   # comment
//   [attack]
//   strategy = s2mi-fgsm
//   epsilon = 0.01
//
// Sections: data, augment, encoder, manifold, attack, eval. Unknown sections
// or keys are errors. Command-line flags are applied on top.
struct RunConfig {
  SyntheticSpec data;
  AugmentationConfig augment;
  ContrastiveConfig encoder;
  ManifoldSettings manifold;
  AttackConfig attack;
  EvalSettings eval;
  int attack_jobs = 1;
  int eval_jobs = 1;

  void set(std::string_view section, std::string_view key, std::string_view value);
  void load_text(std::string_view text);
  void load_file(const std::filesystem::path& path);

  // Every "section.key" with its current value, in key order.
  std::vector<std::pair<std::string, std::string>> values() const;

  // Every accepted "section.key".
  static std::vector<std::string> known_keys();
};

}  // namespace skelattack
