#include "scanpath/bayes.hpp"

#include <cmath>

#include "scanpath/ops.hpp"

namespace scanpath::ad {

BayesConvParams BayesConvParams::init(std::size_t out, std::size_t in, std::size_t k, double init_rho, Rng& rng) {
    const Shape kshape{out, in, k, k};
    const double bound = 1.0 / std::sqrt(double(in * k * k));
    std::vector<double> mu(numel(kshape));
    for (auto& v : mu) v = (2.0 * rng.uniform() - 1.0) * bound;
    std::vector<double> bmu(out);
    for (auto& v : bmu) v = (2.0 * rng.uniform() - 1.0) * bound;
    return {Tensor::from(kshape, std::move(mu), true), Tensor::full(kshape, init_rho, true),
            Tensor::from({out}, std::move(bmu), true), Tensor::full({out}, init_rho, true)};
}

namespace {

Tensor draw(const Tensor& mu, const Tensor& rho, Rng& rng) {
    std::vector<double> eps(mu.numel());
    for (auto& e : eps) e = rng.normal();
    const auto noise = Tensor::from(mu.shape(), std::move(eps));
    return add(mu, hadamard(softplus(rho), noise));
}

}  // namespace

SampledConv sample_bayes_kernel(const BayesConvParams& p, Rng& rng) {
    if (p.mu.shape() != p.rho.shape() || p.bias_mu.shape() != p.bias_rho.shape())
        throw ShapeError("sample_bayes_kernel: mean/scale shape mismatch");
    auto kernel = draw(p.mu, p.rho, rng);
    auto bias = draw(p.bias_mu, p.bias_rho, rng);
    return {std::move(kernel), std::move(bias)};
}

}  // namespace scanpath::ad
