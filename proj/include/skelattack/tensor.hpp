#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace skelattack {

// Dense frames x joints x channels tensor, frame-major (the channel index
// varies fastest). This is the in-memory layout of every motion quantity:
// coordinates, gradients, bone vectors and perturbations.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t frames, std::size_t joints, std::size_t channels,
          double fill = 0.0)
      : frames_(frames),
        joints_(joints),
        channels_(channels),
        values_(frames * joints * channels, fill) {}

  std::size_t frames() const { return frames_; }
  std::size_t joints() const { return joints_; }
  std::size_t channels() const { return channels_; }
  std::size_t size() const { return values_.size(); }
  // Scalars per frame (J*C); each is one degree of freedom.
  std::size_t frame_stride() const { return joints_ * channels_; }

  double& operator()(std::size_t t, std::size_t j, std::size_t c) {
    return values_[(t * joints_ + j) * channels_ + c];
  }
  double operator()(std::size_t t, std::size_t j, std::size_t c) const {
    return values_[(t * joints_ + j) * channels_ + c];
  }

  // Access by (frame, dof) where dof = j * C + c.
  double& at_dof(std::size_t t, std::size_t dof) {
    return values_[t * frame_stride() + dof];
  }
  double at_dof(std::size_t t, std::size_t dof) const {
    return values_[t * frame_stride() + dof];
  }

  std::span<double> frame(std::size_t t) {
    return {values_.data() + t * frame_stride(), frame_stride()};
  }
  std::span<const double> frame(std::size_t t) const {
    return {values_.data() + t * frame_stride(), frame_stride()};
  }

  std::span<double> flat() { return values_; }
  std::span<const double> flat() const { return values_; }

  bool same_shape(const Tensor3& other) const {
    return frames_ == other.frames_ && joints_ == other.joints_ &&
           channels_ == other.channels_;
  }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t frames_ = 0;
  std::size_t joints_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> values_;
};

}  // namespace skelattack
