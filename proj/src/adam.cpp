#include "scanpath/adam.hpp"

#include <cmath>

namespace scanpath::ad {

AdamState AdamState::for_params(std::span<const Tensor> params) {
    AdamState s;
    for (const auto& p : params) {
        s.first_moment.emplace_back(p.numel(), 0.0);
        s.second_moment.emplace_back(p.numel(), 0.0);
    }
    return s;
}

void adam_step(std::span<Tensor> params, AdamState& state, double lr, const AdamHyper& hyper) {
    if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size())
        throw ShapeError("adam_step: optimizer state does not match parameter count");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (state.first_moment[i].size() != params[i].numel() || state.second_moment[i].size() != params[i].numel())
            throw ShapeError("adam_step: moment shape mismatch for parameter " + std::to_string(i));

    ++state.step;
    const double c1 = 1.0 - std::pow(hyper.beta1, double(state.step));
    const double c2 = 1.0 - std::pow(hyper.beta2, double(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto data = params[i].mutable_data();
        const auto grad = params[i].grad();
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        for (std::size_t j = 0; j < data.size(); ++j) {
            const double g = grad[j];
            m[j] = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * g;
            v[j] = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * g * g;
            data[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + hyper.eps);
        }
    }
}

}  // namespace scanpath::ad
