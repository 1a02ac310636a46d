#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scanpath/tensor.hpp"

namespace scanpath::ad {

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::uint64_t step = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;

    /// Zero moments shaped like params.
    static AdamState for_params(std::span<const Tensor> params);
};

/// In-place bias-corrected Adam update of every parameter from its grad().
void adam_step(std::span<Tensor> params, AdamState& state, double lr, const AdamHyper& hyper = {});

}  // namespace scanpath::ad
