#include "skelattack/motion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "skelattack/error.hpp"

namespace skelattack {

namespace {

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

// Parent of each joint in the standard layout; the root points to itself.
constexpr std::size_t kStandardParent[25] = {
    0,  0,  20, 2,  20, 4,  5,  6,  20, 8,  9,  10, 0,
    12, 13, 14, 0,  16, 17, 18, 1,  22, 7,  24, 11};

constexpr double kStandardRest[25][3] = {
    {0.00, 0.00, 0.00},   {0.00, 0.30, 0.00},   {0.00, 0.66, 0.00},
    {0.00, 0.82, 0.02},   {0.18, 0.54, 0.00},   {0.25, 0.30, 0.02},
    {0.28, 0.08, 0.04},   {0.29, 0.02, 0.05},   {-0.18, 0.54, 0.00},
    {-0.25, 0.30, 0.02},  {-0.28, 0.08, 0.04},  {-0.29, 0.02, 0.05},
    {0.10, -0.02, 0.00},  {0.11, -0.40, 0.02},  {0.11, -0.78, 0.00},
    {0.11, -0.82, 0.08},  {-0.10, -0.02, 0.00}, {-0.11, -0.40, 0.02},
    {-0.11, -0.78, 0.00}, {-0.11, -0.82, 0.08}, {0.00, 0.55, 0.00},
    {0.30, -0.06, 0.06},  {0.31, -0.01, 0.08},  {-0.30, -0.06, 0.06},
    {-0.31, -0.01, 0.08}};

std::vector<int> joint_depths(const SkeletonTopology& topology) {
  const std::size_t n = topology.joint_count();
  std::vector<std::vector<std::size_t>> adjacency(n);
  for (const Bone& b : topology.bones()) {
    adjacency[b.parent].push_back(b.child);
    adjacency[b.child].push_back(b.parent);
  }
  std::vector<int> depth(n, -1);
  std::vector<std::size_t> frontier{0};
  depth[0] = 0;
  while (!frontier.empty()) {
    std::vector<std::size_t> next;
    for (std::size_t j : frontier) {
      for (std::size_t k : adjacency[j]) {
        if (depth[k] < 0) {
          depth[k] = depth[j] + 1;
          next.push_back(k);
        }
      }
    }
    frontier = std::move(next);
  }
  return depth;
}

void check_finite(const Tensor3& frames) {
  for (double v : frames.flat()) {
    if (!std::isfinite(v)) throw Error("sequence contains non-finite coordinates");
  }
}

}  // namespace

SkeletonTopology::SkeletonTopology(std::size_t joint_count, std::vector<Bone> bones)
    : joint_count_(joint_count), bones_(std::move(bones)) {
  if (joint_count_ == 0) throw Error("topology needs at least one joint");
  if (bones_.size() != joint_count_ - 1) {
    throw Error("topology with " + std::to_string(joint_count_) + " joints needs " +
                std::to_string(joint_count_ - 1) + " bones, got " +
                std::to_string(bones_.size()));
  }
  std::vector<std::size_t> parent(joint_count_);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  for (const Bone& b : bones_) {
    if (b.parent >= joint_count_ || b.child >= joint_count_) {
      throw Error("bone references joint outside topology");
    }
    const std::size_t a = find_root(parent, b.parent);
    const std::size_t c = find_root(parent, b.child);
    if (a == c) throw Error("topology edges contain a cycle");
    parent[c] = a;
  }
  // n-1 edges without a cycle on n nodes is a spanning tree.
}

SkeletonTopology SkeletonTopology::standard25() {
  std::vector<Bone> bones;
  bones.reserve(24);
  for (std::size_t j = 1; j < 25; ++j) bones.push_back({kStandardParent[j], j});
  return SkeletonTopology(25, std::move(bones));
}

SkeletonTopology SkeletonTopology::chain(std::size_t joint_count) {
  std::vector<Bone> bones;
  for (std::size_t j = 1; j < joint_count; ++j) bones.push_back({j - 1, j});
  return SkeletonTopology(joint_count, std::move(bones));
}

SkeletonTopology SkeletonTopology::for_joint_count(std::size_t joint_count) {
  return joint_count == 25 ? standard25() : chain(joint_count);
}

Tensor3 standard25_rest_pose() {
  Tensor3 pose(1, 25, 3);
  for (std::size_t j = 0; j < 25; ++j) {
    for (std::size_t c = 0; c < 3; ++c) pose(0, j, c) = kStandardRest[j][c];
  }
  return pose;
}

SkeletalSequence::SkeletalSequence(Tensor3 frames, SkeletonTopology topology,
                                   std::optional<int> label)
    : frames_(std::move(frames)), topology_(std::move(topology)), label_(label) {
  if (frames_.frames() < kMinFrames) {
    throw Error("sequence needs at least 3 frames, got " +
                std::to_string(frames_.frames()));
  }
  if (frames_.joints() != topology_.joint_count()) {
    throw Error("sequence has " + std::to_string(frames_.joints()) +
                " joints but topology has " +
                std::to_string(topology_.joint_count()));
  }
  if (frames_.channels() == 0) throw Error("sequence has no coordinate channels");
  check_finite(frames_);
}

SkeletalSequence SkeletalSequence::with_frames(Tensor3 frames) const {
  return SkeletalSequence(std::move(frames), topology_, label_);
}

SkeletalSequence SkeletalSequence::without_label() const {
  return SkeletalSequence(frames_, topology_, std::nullopt);
}

Tensor3 compute_bones(const Tensor3& frames, const SkeletonTopology& topology) {
  if (frames.joints() != topology.joint_count()) {
    throw Error("joint count does not match topology");
  }
  const auto& bones = topology.bones();
  Tensor3 out(frames.frames(), bones.size(), frames.channels());
  for (std::size_t t = 0; t < frames.frames(); ++t) {
    for (std::size_t e = 0; e < bones.size(); ++e) {
      for (std::size_t c = 0; c < frames.channels(); ++c) {
        out(t, e, c) = frames(t, bones[e].child, c) - frames(t, bones[e].parent, c);
      }
    }
  }
  return out;
}

Tensor3 second_difference(const Tensor3& frames) {
  if (frames.frames() < 3) throw Error("sequence too short for acceleration");
  Tensor3 out(frames.frames() - 2, frames.joints(), frames.channels());
  for (std::size_t t = 0; t + 2 < frames.frames(); ++t) {
    auto a = frames.frame(t);
    auto b = frames.frame(t + 1);
    auto c = frames.frame(t + 2);
    auto o = out.frame(t);
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = c[i] - 2.0 * b[i] + a[i];
  }
  return out;
}

std::vector<SkeletalSequence> generate_synthetic_dataset(const SyntheticSpec& spec) {
  if (spec.class_count < 2) throw Error("synthetic data needs at least 2 classes");
  if (spec.per_class < 1) throw Error("synthetic data needs at least 1 sample per class");
  if (spec.frames < 8) throw Error("synthetic data needs at least 8 frames");
  if (!(spec.jitter_sigma >= 0.0)) throw Error("jitter sigma must be non-negative");

  const SkeletonTopology topology = SkeletonTopology::standard25();
  const Tensor3 rest = standard25_rest_pose();
  const std::vector<int> depth = joint_depths(topology);
  const int max_depth = *std::max_element(depth.begin(), depth.end());
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const std::size_t joints = 25;
  const std::size_t frames = static_cast<std::size_t>(spec.frames);

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  struct ClassMotion {
    double frequency;  // cycles per sequence
    double amplitude;
    double phase;
    Tensor3 direction;  // 1 x J x 3, per-joint displacement direction
  };
  std::vector<ClassMotion> classes;
  for (int k = 0; k < spec.class_count; ++k) {
    ClassMotion m{1.0 + 0.7 * k + 0.3 * unit(rng), 0.15 + 0.2 * unit(rng),
                  kTwoPi * k / spec.class_count + 0.5 * unit(rng),
                  Tensor3(1, joints, 3)};
    for (std::size_t j = 0; j < joints; ++j) {
      double d[3] = {normal(rng), normal(rng), normal(rng)};
      const double norm = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) + 1e-12;
      const double reach = 0.3 + 0.7 * depth[j] / static_cast<double>(max_depth);
      for (std::size_t c = 0; c < 3; ++c) m.direction(0, j, c) = reach * d[c] / norm;
    }
    classes.push_back(std::move(m));
  }

  std::vector<Tensor3> raw;
  std::vector<int> labels;
  for (int k = 0; k < spec.class_count; ++k) {
    const ClassMotion& m = classes[static_cast<std::size_t>(k)];
    for (int s = 0; s < spec.per_class; ++s) {
      const double amp = m.amplitude * (0.85 + 0.3 * unit(rng));
      const double phase = m.phase + 0.8 * (unit(rng) - 0.5);
      Tensor3 x(frames, joints, 3);
      for (std::size_t t = 0; t < frames; ++t) {
        const double time = static_cast<double>(t) / static_cast<double>(frames);
        for (std::size_t j = 0; j < joints; ++j) {
          // Raised cosine: an excursion from the rest pose and back, so each
          // class also has its own mean posture.
          const double wave =
              0.5 * (1.0 - std::cos(kTwoPi * m.frequency * time + phase + 0.25 * depth[j]));
          for (std::size_t c = 0; c < 3; ++c) {
            x(t, j, c) = rest(0, j, c) + amp * m.direction(0, j, c) * wave +
                         spec.jitter_sigma * normal(rng);
          }
        }
      }
      raw.push_back(std::move(x));
      labels.push_back(k);
    }
  }

  double max_abs = 0.0;
  for (const Tensor3& x : raw) {
    for (double v : x.flat()) max_abs = std::max(max_abs, std::abs(v));
  }
  std::vector<SkeletalSequence> out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    for (double& v : raw[i].flat()) {
      // Clamp guards against float rounding pushing |v| past 1.
      v = static_cast<double>(static_cast<float>(std::clamp(v / max_abs, -1.0, 1.0)));
    }
    out.emplace_back(std::move(raw[i]), topology, labels[i]);
  }
  return out;
}

}  // namespace skelattack
