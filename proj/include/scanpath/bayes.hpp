#pragma once

#include <cstddef>

#include "scanpath/rng.hpp"
#include "scanpath/tensor.hpp"

namespace scanpath::ad {

/// Gaussian posterior over a convolution's weights: std = softplus(rho).
struct BayesConvParams {
    Tensor mu;       // [out, in, k, k]
    Tensor rho;      // same shape as mu
    Tensor bias_mu;  // [out]
    Tensor bias_rho; // [out]

    /// Means drawn uniformly in +-1/sqrt(fan_in), rho set to init_rho.
    static BayesConvParams init(std::size_t out, std::size_t in, std::size_t k, double init_rho, Rng& rng);
};

struct SampledConv {
    Tensor kernel;
    Tensor bias;
};

/// Reparameterized draw w = mu + softplus(rho) * eps, eps ~ N(0, 1) from rng.
/// Differentiable with respect to mu and rho.
SampledConv sample_bayes_kernel(const BayesConvParams& p, Rng& rng);

}  // namespace scanpath::ad
