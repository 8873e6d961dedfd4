#include "skelattack/dynamics.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "skelattack/error.hpp"

namespace skelattack {

TvarCoefficients::TvarCoefficients(int order, std::size_t frames, std::size_t dofs)
    : order_(order),
      frames_(frames),
      dofs_(dofs),
      lag1_(frames * dofs, 0.0),
      lag2_(order == 2 ? frames * dofs : 0, 0.0),
      intercept_(frames * dofs, 0.0),
      residual_(frames * dofs, 0.0) {
  if (order != 1 && order != 2) throw Error("TV-AR order must be 1 or 2");
}

std::size_t TvarCoefficients::slot(std::size_t t, std::size_t dof, std::size_t begin,
                                   const char* name) const {
  if (t < begin || t >= frames_ || dof >= dofs_) {
    throw Error(std::string("TV-AR ") + name + " queried outside its frame range (frame " +
                std::to_string(t) + ", dof " + std::to_string(dof) + ")");
  }
  return t * dofs_ + dof;
}

double TvarCoefficients::lag1(std::size_t t, std::size_t dof) const {
  return lag1_[slot(t, dof, lag1_begin(), "lag-1 coefficient")];
}
double& TvarCoefficients::lag1(std::size_t t, std::size_t dof) {
  return lag1_[slot(t, dof, lag1_begin(), "lag-1 coefficient")];
}
double TvarCoefficients::lag2(std::size_t t, std::size_t dof) const {
  if (order_ != 2) throw Error("lag-2 coefficient requires an order-2 model");
  return lag2_[slot(t, dof, lag2_begin(), "lag-2 coefficient")];
}
double& TvarCoefficients::lag2(std::size_t t, std::size_t dof) {
  if (order_ != 2) throw Error("lag-2 coefficient requires an order-2 model");
  return lag2_[slot(t, dof, lag2_begin(), "lag-2 coefficient")];
}
double TvarCoefficients::intercept(std::size_t t, std::size_t dof) const {
  return intercept_[slot(t, dof, intercept_begin(), "intercept")];
}
double& TvarCoefficients::intercept(std::size_t t, std::size_t dof) {
  return intercept_[slot(t, dof, intercept_begin(), "intercept")];
}
double TvarCoefficients::residual_std(std::size_t t, std::size_t dof) const {
  return residual_[slot(t, dof, intercept_begin(), "residual")];
}
double& TvarCoefficients::residual_std(std::size_t t, std::size_t dof) {
  return residual_[slot(t, dof, intercept_begin(), "residual")];
}

double TvarCoefficients::predict(const Tensor3& series, std::size_t t, std::size_t dof) const {
  double value = lag1(t, dof) * series.at_dof(t - 1, dof) + intercept(t, dof);
  if (order_ == 2) value += lag2(t, dof) * series.at_dof(t - 2, dof);
  return value;
}

bool TvarCoefficients::all_finite() const {
  auto finite = [](const std::vector<double>& v) {
    for (double x : v) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  };
  return finite(lag1_) && finite(lag2_) && finite(intercept_) && finite(residual_);
}

void TvarCoefficients::set_zero() {
  for (auto* v : {&lag1_, &lag2_, &intercept_, &residual_}) std::fill(v->begin(), v->end(), 0.0);
}

void TvarCoefficients::write_csv(std::ostream& out) const {
  write_csv_header(out, false);
  write_csv_rows(out, std::nullopt);
}

void TvarCoefficients::write_csv_header(std::ostream& out, bool with_sample) {
  if (with_sample) out << "sample,";
  out << "frame,dof,lag1,lag2,intercept,residual_std\n";
}

void TvarCoefficients::write_csv_rows(std::ostream& out,
                                      std::optional<std::size_t> sample) const {
  out.precision(17);
  for (std::size_t t = intercept_begin(); t < frames_; ++t) {
    for (std::size_t d = 0; d < dofs_; ++d) {
      if (sample) out << *sample << ',';
      out << t << ',' << d << ',' << lag1(t, d) << ',';
      if (order_ == 2) out << lag2(t, d);
      out << ',' << intercept(t, d) << ',' << residual_std(t, d) << '\n';
    }
  }
}

namespace {

constexpr std::size_t kMinRows = 3;

struct Fit {
  double lag1 = 0.0;
  double lag2 = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
};

// Ridge regression of s[u] on (s[u-1], ..., s[u-order]) and an intercept over
// rows u in [lo, hi]. Regressors are centred so the intercept is unpenalised;
// a singular system (ridge 0, collinear rows) takes the minimum-norm solution.
Fit regress(const Tensor3& s, std::size_t dof, int order, std::size_t lo, std::size_t hi,
            double ridge) {
  const auto p = static_cast<Eigen::Index>(order);
  const double n = static_cast<double>(hi - lo + 1);
  Eigen::VectorXd x_mean = Eigen::VectorXd::Zero(p);
  double y_mean = 0.0;
  for (std::size_t u = lo; u <= hi; ++u) {
    for (Eigen::Index k = 0; k < p; ++k) {
      x_mean(k) += s.at_dof(u - 1 - static_cast<std::size_t>(k), dof);
    }
    y_mean += s.at_dof(u, dof);
  }
  x_mean /= n;
  y_mean /= n;

  Eigen::MatrixXd gram = ridge * Eigen::MatrixXd::Identity(p, p);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd xc(p);
  for (std::size_t u = lo; u <= hi; ++u) {
    for (Eigen::Index k = 0; k < p; ++k) {
      xc(k) = s.at_dof(u - 1 - static_cast<std::size_t>(k), dof) - x_mean(k);
    }
    gram.noalias() += xc * xc.transpose();
    rhs += xc * (s.at_dof(u, dof) - y_mean);
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  if (gram.norm() > 0.0) beta = gram.completeOrthogonalDecomposition().solve(rhs);

  Fit fit;
  fit.lag1 = beta(0);
  if (order == 2) fit.lag2 = beta(1);
  fit.intercept = y_mean - beta.dot(x_mean);

  double sse = 0.0;
  for (std::size_t u = lo; u <= hi; ++u) {
    double pred = fit.lag1 * s.at_dof(u - 1, dof) + fit.intercept;
    if (order == 2) pred += fit.lag2 * s.at_dof(u - 2, dof);
    const double r = s.at_dof(u, dof) - pred;
    sse += r * r;
  }
  fit.residual = std::sqrt(sse / n);
  return fit;
}

}  // namespace

TvarCoefficients fit_tvar(int order, const Tensor3& series, const TvarFitOptions& options) {
  if (order != 1 && order != 2) throw Error("TV-AR order must be 1 or 2");
  const std::size_t frames = series.frames();
  const std::size_t min_window = order == 1 ? 3 : 5;
  const std::size_t min_frames = order == 1 ? 3 : 4;
  if (frames < min_frames) {
    throw Error("TV-AR(" + std::to_string(order) + ") needs at least " +
                std::to_string(min_frames) + " frames");
  }
  if (options.window < min_window || options.window % 2 == 0) {
    throw Error("TV-AR(" + std::to_string(order) + ") window must be odd and >= " +
                std::to_string(min_window));
  }
  if (!(options.ridge >= 0.0)) throw Error("ridge must be >= 0");

  const auto first = static_cast<std::size_t>(order);
  const std::size_t half = options.window / 2;
  auto rows = [&](std::size_t t) {
    const std::size_t lo = t >= first + half ? t - half : first;
    const std::size_t hi = std::min(frames - 1, t + half);
    return std::pair{lo, hi};
  };

  // Frames with too few rows borrow from the nearest frame that has enough;
  // if none has, every frame fits on what it has.
  std::vector<std::size_t> source(frames, 0);
  std::vector<std::size_t> valid;
  for (std::size_t t = first; t < frames; ++t) {
    const auto [lo, hi] = rows(t);
    if (hi - lo + 1 >= kMinRows) valid.push_back(t);
  }
  for (std::size_t t = first; t < frames; ++t) {
    if (valid.empty()) {
      source[t] = t;
      continue;
    }
    std::size_t best = valid.front();
    for (std::size_t v : valid) {
      const auto dist = [t](std::size_t a) { return a > t ? a - t : t - a; };
      if (dist(v) < dist(best)) best = v;
    }
    source[t] = best;
  }

  TvarCoefficients coef(order, frames, series.frame_stride());
  for (std::size_t d = 0; d < series.frame_stride(); ++d) {
    for (std::size_t t = first; t < frames; ++t) {
      if (source[t] != t) continue;
      const auto [lo, hi] = rows(t);
      const Fit fit = regress(series, d, order, lo, hi, options.ridge);
      coef.lag1(t, d) = fit.lag1;
      if (order == 2) coef.lag2(t, d) = fit.lag2;
      coef.intercept(t, d) = fit.intercept;
      coef.residual_std(t, d) = fit.residual;
    }
    for (std::size_t t = first; t < frames; ++t) {
      const std::size_t src = source[t];
      if (src == t) continue;
      coef.lag1(t, d) = coef.lag1(src, d);
      if (order == 2) coef.lag2(t, d) = coef.lag2(src, d);
      coef.intercept(t, d) = coef.intercept(src, d);
      coef.residual_std(t, d) = coef.residual_std(src, d);
    }
    if (order == 2) coef.lag1(1, d) = coef.lag1(2, d);
  }
  if (!coef.all_finite()) throw Error("TV-AR fit produced non-finite coefficients");
  return coef;
}

TvarCoefficients fit_tvar1(const Tensor3& series, const TvarFitOptions& options) {
  return fit_tvar(1, series, options);
}

TvarCoefficients fit_tvar2(const Tensor3& series, const TvarFitOptions& options) {
  return fit_tvar(2, series, options);
}

}  // namespace skelattack
