#pragma once

#include <span>
#include <vector>

#include "scanpath/tensor.hpp"

namespace scanpath::ad {

// Elementwise. Binary ops require identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor reciprocal(const Tensor& x);
/// max(x, floor); gradient passes only where x > floor.
Tensor clamp_min(const Tensor& x, double floor);

/// Sum of all entries, shape {1}.
Tensor sum(const Tensor& x);
/// Sum of scalar tensors, shape {1}.
Tensor sum_scalars(std::span<const Tensor> xs);

/// Softmax over every entry of x, preserving its shape (intended for [H,W]
/// or [1,H,W] logit maps).
Tensor map_softmax(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
/// Concatenation along dimension 0.
Tensor concat(std::span<const Tensor> xs);
/// Rows [begin, end) along dimension 0.
Tensor slice(const Tensor& x, std::size_t begin, std::size_t end);
/// Scalars arranged row-major into shape {rows, cols}.
Tensor stack_scalars(std::span<const Tensor> xs, std::size_t rows, std::size_t cols);

/// Zero-padded "same" cross-correlation.
/// input [C_in,H,W], kernel [C_out,C_in,k,k] with k odd, bias [C_out] -> [C_out,H,W].
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias);

}  // namespace scanpath::ad
