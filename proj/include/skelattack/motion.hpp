#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "skelattack/tensor.hpp"

namespace skelattack {

struct Bone {
  std::size_t parent;
  std::size_t child;
  friend bool operator==(const Bone&, const Bone&) = default;
};

// A rooted tree over joint indices. Construction validates that the edges
// span all joints without cycles.
class SkeletonTopology {
 public:
  SkeletonTopology(std::size_t joint_count, std::vector<Bone> bones);

  // 25-joint Kinect v2 layout (joint 0 = spine base). See docs/skeleton.md.
  static SkeletonTopology standard25();
  // Joints linked 0-1-2-...; used for datasets with non-standard joint counts.
  static SkeletonTopology chain(std::size_t joint_count);
  // standard25() when joint_count == 25, chain() otherwise.
  static SkeletonTopology for_joint_count(std::size_t joint_count);

  std::size_t joint_count() const { return joint_count_; }
  const std::vector<Bone>& bones() const { return bones_; }

  friend bool operator==(const SkeletonTopology&,
                         const SkeletonTopology&) = default;

 private:
  std::size_t joint_count_;
  std::vector<Bone> bones_;
};

// Rest pose for standard25(), y up, roughly unit height.
Tensor3 standard25_rest_pose();

class SkeletalSequence {
 public:
  SkeletalSequence(Tensor3 frames, SkeletonTopology topology,
                   std::optional<int> label = std::nullopt);

  const Tensor3& frames() const { return frames_; }
  const SkeletonTopology& topology() const { return topology_; }
  const std::optional<int>& label() const { return label_; }

  std::size_t frame_count() const { return frames_.frames(); }
  std::size_t joint_count() const { return frames_.joints(); }

  // Same topology and label, new coordinates. Validates like the constructor.
  SkeletalSequence with_frames(Tensor3 frames) const;
  SkeletalSequence without_label() const;

  friend bool operator==(const SkeletalSequence&,
                         const SkeletalSequence&) = default;

 private:
  Tensor3 frames_;
  SkeletonTopology topology_;
  std::optional<int> label_;
};

inline constexpr std::size_t kMinFrames = 3;

// T x E x C bone vectors, child minus parent, in topology edge order.
Tensor3 compute_bones(const Tensor3& frames, const SkeletonTopology& topology);
inline Tensor3 compute_bones(const SkeletalSequence& seq) {
  return compute_bones(seq.frames(), seq.topology());
}

// (T-2) x J x C: frames[t+2] - 2 frames[t+1] + frames[t].
Tensor3 second_difference(const Tensor3& frames);
inline Tensor3 second_difference(const SkeletalSequence& seq) {
  return second_difference(seq.frames());
}

struct SyntheticSpec {
  int class_count = 4;
  int per_class = 16;
  int frames = 32;
  std::uint64_t seed = 7;
  double jitter_sigma = 0.004;
};

// Labelled sinusoidal motion around the standard25 rest pose. Each class has
// its own frequency, amplitude, phase and per-joint direction pattern; joints
// follow a raised cosine along their direction. Samples vary in amplitude and
// phase and carry Gaussian jitter. Coordinates are scaled
// into [-1, 1] and rounded to float precision so the on-disk format stores
// them exactly. Output is grouped by class.
std::vector<SkeletalSequence> generate_synthetic_dataset(const SyntheticSpec& spec);

}  // namespace skelattack
