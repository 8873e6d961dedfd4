#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <vector>

#include "skelattack/tensor.hpp"

namespace skelattack {

// Per-frame, per-DOF coefficients of a time-varying autoregressive model.
//
// Order 1:  s[t] = A[t] s[t-1] + B[t] + noise,               frames t >= 1
// Order 2:  s[t] = C[t] s[t-1] + D[t] s[t-2] + E[t] + noise,  frames t >= 2
//
// Frame indices are 0-based. lag1() is A (order 1) or C (order 2), lag2() is
// D, intercept() is B or E. For order 2, lag1() is additionally defined at
// frame 1 as a copy of the nearest fitted frame, because the second-order
// gradient transform needs C at the frame after the first one.
class TvarCoefficients {
 public:
  TvarCoefficients(int order, std::size_t frames, std::size_t dofs);

  int order() const { return order_; }
  std::size_t frames() const { return frames_; }
  std::size_t dofs() const { return dofs_; }

  // First frame at which each coefficient is defined.
  std::size_t lag1_begin() const { return 1; }
  std::size_t lag2_begin() const { return 2; }
  std::size_t intercept_begin() const { return static_cast<std::size_t>(order_); }

  double lag1(std::size_t t, std::size_t dof) const;
  double& lag1(std::size_t t, std::size_t dof);
  double lag2(std::size_t t, std::size_t dof) const;
  double& lag2(std::size_t t, std::size_t dof);
  double intercept(std::size_t t, std::size_t dof) const;
  double& intercept(std::size_t t, std::size_t dof);
  double residual_std(std::size_t t, std::size_t dof) const;
  double& residual_std(std::size_t t, std::size_t dof);

  // Model prediction of frame t from the preceding frames of `series`.
  double predict(const Tensor3& series, std::size_t t, std::size_t dof) const;

  bool all_finite() const;
  void set_zero();

  // Columns: frame,dof,lag1,lag2,intercept,residual_std (lag2 empty for
  // order 1). Only frames where the intercept is defined are written.
  void write_csv(std::ostream& out) const;
  // Pieces of the above; with a sample index every row gets a leading
  // sample column.
  static void write_csv_header(std::ostream& out, bool with_sample);
  void write_csv_rows(std::ostream& out, std::optional<std::size_t> sample) const;

 private:
  std::size_t slot(std::size_t t, std::size_t dof, std::size_t begin, const char* name) const;

  int order_;
  std::size_t frames_;
  std::size_t dofs_;
  std::vector<double> lag1_;
  std::vector<double> lag2_;
  std::vector<double> intercept_;
  std::vector<double> residual_;
};

struct TvarFitOptions {
  std::size_t window = 7;  // odd, centred on the fitted frame
  double ridge = 1e-4;     // penalty on the lag coefficients, not the intercept
};

// Sliding-window ridge least squares, one scalar regression per DOF and
// frame. Rows are the frames u of the window around t (truncated at the
// sequence ends) with target s[u] and regressors s[u-1] (and s[u-2]) plus an
// intercept. Frames whose truncated window has fewer than 3 rows copy the
// coefficients of the nearest frame that has enough.
TvarCoefficients fit_tvar1(const Tensor3& series, const TvarFitOptions& options);
TvarCoefficients fit_tvar2(const Tensor3& series, const TvarFitOptions& options);
TvarCoefficients fit_tvar(int order, const Tensor3& series, const TvarFitOptions& options);

}  // namespace skelattack
