#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "skelattack/tensor.hpp"

namespace skelattack::testing {

inline Tensor3 random_tensor(std::size_t t, std::size_t j, std::size_t c, std::uint64_t seed,
                             double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  Tensor3 x(t, j, c);
  for (double& v : x.flat()) v = u(rng);
  return x;
}

inline double max_abs_diff(const Tensor3& a, const Tensor3& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a.flat()[i] - b.flat()[i]));
  }
  return m;
}

// Central differences of a scalar function of every coordinate of `x`.
template <typename Fn>
Tensor3 numeric_gradient(const Tensor3& x, Fn&& f, double h = 1e-5) {
  Tensor3 probe = x;
  Tensor3 g(x.frames(), x.joints(), x.channels());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x.flat()[i];
    probe.flat()[i] = v + h;
    const double up = f(probe);
    probe.flat()[i] = v - h;
    const double down = f(probe);
    probe.flat()[i] = v;
    g.flat()[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Largest elementwise |a - b| / max(|a|, |b|, floor).
template <typename A, typename B>
double max_relative_error(const A& a, const B& b, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(a.size()); ++i) {
    const double x = a.data()[i];
    const double y = b.data()[i];
    worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), floor}));
  }
  return worst;
}

inline double max_relative_error(const Tensor3& a, const Tensor3& b, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a.flat()[i];
    const double y = b.flat()[i];
    worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), floor}));
  }
  return worst;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("skelattack-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace skelattack::testing
