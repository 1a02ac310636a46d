#pragma once

#include <functional>

#include "scanpath/tensor.hpp"

namespace scanpath::ad {

/// Compares backward() gradients of f at x with central differences.
///
/// x must be a leaf with requires_grad; its values are perturbed in place and
/// restored. Returns max_i |analytic_i - numeric_i| / max(|analytic_i|, |numeric_i|, 1),
/// i.e. relative error for gradients of magnitude >= 1 and absolute below.
double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double h = 1e-4);

}  // namespace scanpath::ad
