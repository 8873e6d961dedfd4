#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>

#include <Eigen/Dense>

#include "skelattack/motion.hpp"
#include "skelattack/tensor.hpp"

namespace skelattack {

// Unit-norm latent vector produced by an encoder.
using Embedding = Eigen::VectorXd;

// Trainable tensors of a ReferenceEncoder. Also used to hold gradients with
// the same layout.
struct EncoderParameters {
  Eigen::MatrixXd mix;            // J x J, joint mixing (adjacency-initialised)
  Eigen::MatrixXd joint_weights;  // C x H
  Eigen::VectorXd hidden_bias;    // H
  Eigen::MatrixXd projection;     // H x D
  Eigen::VectorXd output_bias;    // D

  std::size_t joints() const { return static_cast<std::size_t>(mix.rows()); }
  std::size_t channels() const { return static_cast<std::size_t>(joint_weights.rows()); }
  std::size_t hidden() const { return static_cast<std::size_t>(joint_weights.cols()); }
  std::size_t embedding_dim() const { return static_cast<std::size_t>(projection.cols()); }

  EncoderParameters zeros_like() const;
  // this += alpha * other
  void axpy(double alpha, const EncoderParameters& other);
  void scale(double factor);
  bool all_finite() const;

  // Visits (name, this tensor) in a fixed order; used by checkpoint I/O.
  template <typename F>
  void for_each(F&& f) {
    f("mix", mix);
    f("joint_weights", joint_weights);
    f("hidden_bias", hidden_bias);
    f("projection", projection);
    f("output_bias", output_bias);
  }
  template <typename F>
  void for_each(F&& f) const {
    f("mix", mix);
    f("joint_weights", joint_weights);
    f("hidden_bias", hidden_bias);
    f("projection", projection);
    f("output_bias", output_bias);
  }

  friend bool operator==(const EncoderParameters& a, const EncoderParameters& b);
};

// Symmetric-normalised adjacency with self loops, D^-1/2 (A + I) D^-1/2.
Eigen::MatrixXd normalized_adjacency(const SkeletonTopology& topology);

// Small graph encoder with hand-written reverse mode:
//
//   h[t] = tanh(mix * x[t] * joint_weights + hidden_bias)   (J x H per frame)
//   z    = mean over frames and joints of h                 (H)
//   y    = projection^T z + output_bias                     (D)
//   out  = y / |y|
//
// If |y| < 1e-12 a fixed offset is added to y before normalising.
class ReferenceEncoder {
 public:
  explicit ReferenceEncoder(EncoderParameters params);

  static ReferenceEncoder initialize(const SkeletonTopology& topology,
                                     std::size_t channels, std::size_t hidden,
                                     std::size_t embedding_dim, std::uint64_t seed);

  Embedding forward(const Tensor3& frames) const;

  // Gradient w.r.t. every input coordinate of the scalar loss whose gradient
  // w.r.t. the embedding is `cotangent`.
  Tensor3 input_gradient(const Tensor3& frames, const Eigen::VectorXd& cotangent) const;

  // One forward pass; the cotangent is computed from the embedding by
  // `cotangent_of` and the input gradient is written to `gradient`.
  using CotangentFn = std::function<Eigen::VectorXd(const Embedding&)>;
  Embedding forward_with_input_gradient(const Tensor3& frames, const CotangentFn& cotangent_of,
                                        Tensor3& gradient) const;

  // Same backward pass, gradient w.r.t. the parameters instead.
  EncoderParameters parameter_gradient(const Tensor3& frames,
                                       const Eigen::VectorXd& cotangent) const;

  const EncoderParameters& parameters() const { return params_; }
  EncoderParameters& mutable_parameters() { return params_; }

  std::size_t joints() const { return params_.joints(); }
  std::size_t channels() const { return params_.channels(); }
  std::size_t embedding_dim() const { return params_.embedding_dim(); }

 private:
  struct Trace;
  Trace run_forward(const Tensor3& frames) const;
  Eigen::VectorXd pre_norm_cotangent(const Trace& trace, const Eigen::VectorXd& cotangent) const;
  Eigen::MatrixXd pre_activation_gradient(const Trace& trace, const Eigen::VectorXd& dy) const;
  Tensor3 backward_input(const Tensor3& frames, const Trace& trace,
                         const Eigen::VectorXd& cotangent) const;
  void check_input(const Tensor3& frames) const;

  EncoderParameters params_;
};

// Checkpoint layout (little-endian):
//   "SKEN" | u32 version | u32 tensor_count
//   per tensor: u32 rows | u32 cols | rows*cols f64 row-major
std::string encode_encoder(const ReferenceEncoder& encoder);
ReferenceEncoder decode_encoder(const std::string& bytes);
void write_encoder(const std::filesystem::path& path, const ReferenceEncoder& encoder);
ReferenceEncoder read_encoder(const std::filesystem::path& path);

}  // namespace skelattack
