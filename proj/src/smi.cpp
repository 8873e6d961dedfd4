#include "skelattack/smi.hpp"

#include "skelattack/error.hpp"

namespace skelattack {

namespace {

void check_shape(const Tensor3& g, const TvarCoefficients& coef, int order) {
  if (coef.order() != order) {
    throw Error("SMI gradient of order " + std::to_string(order) +
                " needs TV-AR(" + std::to_string(order) + ") coefficients");
  }
  if (coef.frames() != g.frames() || coef.dofs() != g.frame_stride()) {
    throw Error("TV-AR coefficients were fitted on a different shape");
  }
}

}  // namespace

Tensor3 smi_first_order(const Tensor3& gradient, const TvarCoefficients& coef) {
  check_shape(gradient, coef, 1);
  Tensor3 out = gradient;
  for (std::size_t t = 1; t < gradient.frames(); ++t) {
    for (std::size_t d = 0; d < gradient.frame_stride(); ++d) {
      out.at_dof(t - 1, d) += gradient.at_dof(t, d) * coef.lag1(t, d);
    }
  }
  return out;
}

Tensor3 smi_second_order(const Tensor3& gradient, const TvarCoefficients& coef) {
  check_shape(gradient, coef, 2);
  const std::size_t frames = gradient.frames();
  Tensor3 out = gradient;
  for (std::size_t d = 0; d < gradient.frame_stride(); ++d) {
    for (std::size_t t = 2; t < frames; ++t) {
      const double c_prev = coef.lag1(t - 1, d);
      out.at_dof(t - 2, d) += gradient.at_dof(t - 1, d) * c_prev +
                              gradient.at_dof(t, d) * (coef.lag2(t, d) + coef.lag1(t, d) * c_prev);
    }
    if (frames >= 2) {
      out.at_dof(frames - 2, d) += gradient.at_dof(frames - 1, d) * coef.lag1(frames - 1, d);
    }
  }
  return out;
}

}  // namespace skelattack
