#pragma once

#include "skelattack/dynamics.hpp"
#include "skelattack/tensor.hpp"

namespace skelattack {

// Skeleton-motion-informed gradients: the per-frame loss gradient g (T x J x C)
// with chain-rule terms through the fitted dynamics, per DOF.
//
// First order (A = lag-1 coefficients of an order-1 model):
//   out[t-1] = g[t-1] + g[t] A[t]                 for t = 1 .. T-1
//   out[T-1] = g[T-1]
//
// Second order (C, D = lag-1, lag-2 coefficients of an order-2 model):
//   out[t-2] = g[t-2] + g[t-1] C[t-1] + g[t] (D[t] + C[t] C[t-1])   t = 2 .. T-1
//   out[T-2] = g[T-2] + g[T-1] C[T-1]
//   out[T-1] = g[T-1]
//
// Both are linear in g and reduce to the identity when the coefficients are
// zero.
Tensor3 smi_first_order(const Tensor3& gradient, const TvarCoefficients& coef);
Tensor3 smi_second_order(const Tensor3& gradient, const TvarCoefficients& coef);

}  // namespace skelattack
