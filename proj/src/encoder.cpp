#include "skelattack/encoder.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "skelattack/binary_io.hpp"
#include "skelattack/error.hpp"

namespace skelattack {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kNormFloor = 1e-12;
constexpr double kDegenerateOffset = 1e-6;
constexpr char kMagic[] = "SKEN";
constexpr std::uint32_t kVersion = 1;

Eigen::Map<const RowMatrix> frame_matrix(const Tensor3& x, std::size_t t) {
  return {x.frame(t).data(), static_cast<Eigen::Index>(x.joints()),
          static_cast<Eigen::Index>(x.channels())};
}

Eigen::Map<RowMatrix> frame_matrix(Tensor3& x, std::size_t t) {
  return {x.frame(t).data(), static_cast<Eigen::Index>(x.joints()),
          static_cast<Eigen::Index>(x.channels())};
}

}  // namespace

EncoderParameters EncoderParameters::zeros_like() const {
  EncoderParameters z;
  z.mix = Eigen::MatrixXd::Zero(mix.rows(), mix.cols());
  z.joint_weights = Eigen::MatrixXd::Zero(joint_weights.rows(), joint_weights.cols());
  z.hidden_bias = Eigen::VectorXd::Zero(hidden_bias.size());
  z.projection = Eigen::MatrixXd::Zero(projection.rows(), projection.cols());
  z.output_bias = Eigen::VectorXd::Zero(output_bias.size());
  return z;
}

void EncoderParameters::axpy(double alpha, const EncoderParameters& other) {
  mix += alpha * other.mix;
  joint_weights += alpha * other.joint_weights;
  hidden_bias += alpha * other.hidden_bias;
  projection += alpha * other.projection;
  output_bias += alpha * other.output_bias;
}

void EncoderParameters::scale(double factor) {
  mix *= factor;
  joint_weights *= factor;
  hidden_bias *= factor;
  projection *= factor;
  output_bias *= factor;
}

bool EncoderParameters::all_finite() const {
  return mix.allFinite() && joint_weights.allFinite() && hidden_bias.allFinite() &&
         projection.allFinite() && output_bias.allFinite();
}

bool operator==(const EncoderParameters& a, const EncoderParameters& b) {
  auto same = [](const auto& x, const auto& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
  };
  return same(a.mix, b.mix) && same(a.joint_weights, b.joint_weights) &&
         same(a.hidden_bias, b.hidden_bias) && same(a.projection, b.projection) &&
         same(a.output_bias, b.output_bias);
}

Eigen::MatrixXd normalized_adjacency(const SkeletonTopology& topology) {
  const auto n = static_cast<Eigen::Index>(topology.joint_count());
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  for (const Bone& b : topology.bones()) {
    a(static_cast<Eigen::Index>(b.parent), static_cast<Eigen::Index>(b.child)) = 1.0;
    a(static_cast<Eigen::Index>(b.child), static_cast<Eigen::Index>(b.parent)) = 1.0;
  }
  const Eigen::VectorXd inv_sqrt_deg = a.rowwise().sum().array().rsqrt();
  return inv_sqrt_deg.asDiagonal() * a * inv_sqrt_deg.asDiagonal();
}

struct ReferenceEncoder::Trace {
  RowMatrix mixed;        // (T*J) x C, frame t occupies rows t*J .. t*J+J-1
  RowMatrix activations;  // (T*J) x H
  Eigen::VectorXd pooled;   // H
  Eigen::VectorXd shifted;  // D, y after the degenerate guard
  double norm = 0.0;
  Embedding output;
};

ReferenceEncoder::ReferenceEncoder(EncoderParameters params) : params_(std::move(params)) {
  const auto& p = params_;
  const bool ok = p.mix.rows() > 0 && p.mix.rows() == p.mix.cols() &&
                  p.joint_weights.rows() > 0 && p.joint_weights.cols() > 0 &&
                  p.hidden_bias.size() == p.joint_weights.cols() &&
                  p.projection.rows() == p.joint_weights.cols() && p.projection.cols() > 0 &&
                  p.output_bias.size() == p.projection.cols();
  if (!ok) throw Error("encoder parameter shapes are inconsistent");
  if (!p.all_finite()) throw Error("encoder parameters contain non-finite values");
}

ReferenceEncoder ReferenceEncoder::initialize(const SkeletonTopology& topology,
                                              std::size_t channels, std::size_t hidden,
                                              std::size_t embedding_dim,
                                              std::uint64_t seed) {
  if (channels == 0 || hidden == 0 || embedding_dim == 0) {
    throw Error("encoder dimensions must be positive");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian = [&](Eigen::Index rows, Eigen::Index cols, double stddev) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = stddev * normal(rng);
    }
    return m;
  };
  const auto c = static_cast<Eigen::Index>(channels);
  const auto h = static_cast<Eigen::Index>(hidden);
  const auto d = static_cast<Eigen::Index>(embedding_dim);

  EncoderParameters p;
  p.mix = normalized_adjacency(topology);
  p.joint_weights = gaussian(c, h, 1.0 / std::sqrt(static_cast<double>(channels)));
  p.hidden_bias = gaussian(h, 1, 0.1);
  p.projection = gaussian(h, d, 1.0 / std::sqrt(static_cast<double>(hidden)));
  p.output_bias = Eigen::VectorXd::Zero(d);
  return ReferenceEncoder(std::move(p));
}

void ReferenceEncoder::check_input(const Tensor3& frames) const {
  if (frames.joints() != joints() || frames.channels() != channels()) {
    throw Error("encoder expects " + std::to_string(joints()) + " joints x " +
                std::to_string(channels()) + " channels, got " +
                std::to_string(frames.joints()) + " x " +
                std::to_string(frames.channels()));
  }
  if (frames.frames() == 0) throw Error("encoder input has no frames");
}

ReferenceEncoder::Trace ReferenceEncoder::run_forward(const Tensor3& frames) const {
  check_input(frames);
  const auto& p = params_;
  const auto n = static_cast<Eigen::Index>(frames.frames());
  const auto j = static_cast<Eigen::Index>(joints());
  Trace trace;
  trace.mixed.resize(n * j, p.joint_weights.rows());
  for (Eigen::Index t = 0; t < n; ++t) {
    trace.mixed.middleRows(t * j, j).noalias() =
        p.mix * frame_matrix(frames, static_cast<std::size_t>(t));
  }
  trace.activations.noalias() = trace.mixed * p.joint_weights;
  trace.activations.rowwise() += p.hidden_bias.transpose();
  trace.activations = trace.activations.array().tanh();
  trace.pooled = trace.activations.colwise().sum().transpose() / static_cast<double>(n * j);
  trace.shifted = p.projection.transpose() * trace.pooled + p.output_bias;
  trace.norm = trace.shifted.norm();
  if (trace.norm < kNormFloor) {
    trace.shifted(0) += kDegenerateOffset;
    trace.norm = trace.shifted.norm();
  }
  trace.output = trace.shifted / trace.norm;
  return trace;
}

Embedding ReferenceEncoder::forward(const Tensor3& frames) const {
  return run_forward(frames).output;
}

Eigen::VectorXd ReferenceEncoder::pre_norm_cotangent(const Trace& trace,
                                                     const Eigen::VectorXd& cotangent) const {
  if (cotangent.size() != static_cast<Eigen::Index>(embedding_dim())) {
    throw Error("cotangent dimension does not match embedding");
  }
  if (!cotangent.allFinite()) throw Error("non-finite upstream gradient");
  // d(y/|y|) = (I - o o^T) / |y|
  const Embedding& o = trace.output;
  return (cotangent - o * o.dot(cotangent)) / trace.norm;
}

// Gradient w.r.t. the pre-activations, (T*J) x H.
Eigen::MatrixXd ReferenceEncoder::pre_activation_gradient(const Trace& trace,
                                                          const Eigen::VectorXd& dy) const {
  const Eigen::RowVectorXd dz = (params_.projection * dy).transpose() /
                                static_cast<double>(trace.activations.rows());
  Eigen::MatrixXd d_pre = (1.0 - trace.activations.array().square()).matrix();
  d_pre.array().rowwise() *= dz.array();
  return d_pre;
}

Tensor3 ReferenceEncoder::backward_input(const Tensor3& frames, const Trace& trace,
                                         const Eigen::VectorXd& cotangent) const {
  const Eigen::VectorXd dy = pre_norm_cotangent(trace, cotangent);
  const Eigen::MatrixXd d_mixed = pre_activation_gradient(trace, dy) *
                                  params_.joint_weights.transpose();
  const auto j = static_cast<Eigen::Index>(joints());
  Tensor3 grad(frames.frames(), frames.joints(), frames.channels());
  for (std::size_t t = 0; t < frames.frames(); ++t) {
    frame_matrix(grad, t).noalias() =
        params_.mix.transpose() * d_mixed.middleRows(static_cast<Eigen::Index>(t) * j, j);
  }
  return grad;
}

Tensor3 ReferenceEncoder::input_gradient(const Tensor3& frames,
                                         const Eigen::VectorXd& cotangent) const {
  return backward_input(frames, run_forward(frames), cotangent);
}

Embedding ReferenceEncoder::forward_with_input_gradient(const Tensor3& frames,
                                                        const CotangentFn& cotangent_of,
                                                        Tensor3& gradient) const {
  const Trace trace = run_forward(frames);
  gradient = backward_input(frames, trace, cotangent_of(trace.output));
  return trace.output;
}

EncoderParameters ReferenceEncoder::parameter_gradient(const Tensor3& frames,
                                                       const Eigen::VectorXd& cotangent) const {
  const Trace trace = run_forward(frames);
  const Eigen::VectorXd dy = pre_norm_cotangent(trace, cotangent);
  const auto& p = params_;
  EncoderParameters g = p.zeros_like();
  g.projection = trace.pooled * dy.transpose();
  g.output_bias = dy;
  const Eigen::MatrixXd d_pre = pre_activation_gradient(trace, dy);
  g.hidden_bias = d_pre.colwise().sum().transpose();
  g.joint_weights.noalias() = trace.mixed.transpose() * d_pre;
  const Eigen::MatrixXd d_mixed = d_pre * p.joint_weights.transpose();
  const auto j = static_cast<Eigen::Index>(joints());
  for (std::size_t t = 0; t < frames.frames(); ++t) {
    g.mix.noalias() +=
        d_mixed.middleRows(static_cast<Eigen::Index>(t) * j, j) * frame_matrix(frames, t).transpose();
  }
  return g;
}

std::string encode_encoder(const ReferenceEncoder& encoder) {
  std::ostringstream out(std::ios::binary);
  io::write_tag(out, kMagic);
  io::write_u32(out, kVersion);
  io::write_u32(out, 5);
  encoder.parameters().for_each([&](const char*, const auto& tensor) {
    io::write_u32(out, static_cast<std::uint32_t>(tensor.rows()));
    io::write_u32(out, static_cast<std::uint32_t>(tensor.cols()));
    for (Eigen::Index i = 0; i < tensor.rows(); ++i) {
      for (Eigen::Index j = 0; j < tensor.cols(); ++j) io::write_f64(out, tensor(i, j));
    }
  });
  return out.str();
}

ReferenceEncoder decode_encoder(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  io::expect_tag(in, kMagic);
  if (io::read_u32(in, "version") != kVersion) throw Error("unsupported encoder version");
  if (io::read_u32(in, "tensor count") != 5) throw Error("encoder checkpoint tensor count");
  EncoderParameters p;
  p.for_each([&](const char* name, auto& tensor) {
    const std::uint32_t rows = io::read_u32(in, name);
    const std::uint32_t cols = io::read_u32(in, name);
    if (std::uint64_t{rows} * cols * 8 > bytes.size()) {
      throw Error(std::string("truncated file while reading ") + name);
    }
    using T = std::decay_t<decltype(tensor)>;
    if constexpr (T::ColsAtCompileTime == 1) {
      if (cols != 1) throw Error(std::string("tensor ") + name + " must be a column");
      tensor.resize(rows);
    } else {
      tensor.resize(rows, cols);
    }
    for (Eigen::Index i = 0; i < tensor.rows(); ++i) {
      for (Eigen::Index j = 0; j < tensor.cols(); ++j) tensor(i, j) = io::read_f64(in, name);
    }
  });
  if (in.peek() != std::char_traits<char>::eof()) throw Error("trailing bytes in checkpoint");
  return ReferenceEncoder(std::move(p));
}

void write_encoder(const std::filesystem::path& path, const ReferenceEncoder& encoder) {
  io::write_file_atomic(path, encode_encoder(encoder));
}

ReferenceEncoder read_encoder(const std::filesystem::path& path) {
  return decode_encoder(io::read_file(path));
}

}  // namespace skelattack
