#include "scanpath/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace scanpath::ad {

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double h) {
    x.zero_grad();
    f(x).backward();
    const std::vector<double> analytic(x.grad().begin(), x.grad().end());

    NoGradGuard no_grad;
    double worst = 0.0;
    auto data = x.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double saved = data[i];
        data[i] = saved + h;
        const double up = f(x).item();
        data[i] = saved - h;
        const double down = f(x).item();
        data[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), 1.0});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
    }
    return worst;
}

}  // namespace scanpath::ad
