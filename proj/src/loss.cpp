#include "scanpath/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "scanpath/ops.hpp"

namespace scanpath::loss {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTiny = 1e-300;

void require_gamma(double gamma) {
    if (!(gamma > 0.0)) throw ParameterError("gamma must be positive");
}

// Soft-min of three values, tolerant of +inf entries.
double soft_min3(double a, double b, double c, double gamma) {
    const double m = std::min({a, b, c});
    if (m == kInf) return kInf;
    const double s = std::exp(-(a - m) / gamma) + std::exp(-(b - m) / gamma) + std::exp(-(c - m) / gamma);
    return m - gamma * std::log(s);
}

// Forward table of size (n+2) x (m+2); interior (1..n, 1..m) holds R.
std::vector<double> soft_dtw_table(std::span<const double> d, std::size_t n, std::size_t m, double gamma) {
    const std::size_t cols = m + 2;
    std::vector<double> R((n + 2) * cols, kInf);
    R[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 1; j <= m; ++j)
            R[i * cols + j] = d[(i - 1) * m + (j - 1)] +
                              soft_min3(R[(i - 1) * cols + j - 1], R[(i - 1) * cols + j], R[i * cols + j - 1], gamma);
    return R;
}

// dR[n,m]/d delta for every cell (expected alignment matrix).
std::vector<double> soft_dtw_alignment(std::span<const double> d, std::vector<double> R, std::size_t n,
                                       std::size_t m, double gamma) {
    const std::size_t cols = m + 2;
    auto D = [&](std::size_t i, std::size_t j) { return (i <= n && j <= m) ? d[(i - 1) * m + (j - 1)] : 0.0; };
    for (std::size_t i = 1; i <= n + 1; ++i) R[i * cols + m + 1] = -kInf;
    for (std::size_t j = 1; j <= m + 1; ++j) R[(n + 1) * cols + j] = -kInf;
    R[(n + 1) * cols + m + 1] = R[n * cols + m];

    std::vector<double> E((n + 2) * cols, 0.0);
    E[(n + 1) * cols + m + 1] = 1.0;
    for (std::size_t j = m; j >= 1; --j)
        for (std::size_t i = n; i >= 1; --i) {
            const double r = R[i * cols + j];
            const double a = std::exp((R[(i + 1) * cols + j] - r - D(i + 1, j)) / gamma);
            const double b = std::exp((R[i * cols + j + 1] - r - D(i, j + 1)) / gamma);
            const double c = std::exp((R[(i + 1) * cols + j + 1] - r - D(i + 1, j + 1)) / gamma);
            E[i * cols + j] = E[(i + 1) * cols + j] * a + E[i * cols + j + 1] * b + E[(i + 1) * cols + j + 1] * c;
        }

    std::vector<double> grad(n * m);
    for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 1; j <= m; ++j) grad[(i - 1) * m + (j - 1)] = E[i * cols + j];
    return grad;
}

}  // namespace

CenterPrior CenterPrior::for_grid(const GridSpec& grid, double sigma) {
    const GazePoint c{(grid.width - 1) / 2.0, (grid.height - 1) / 2.0};
    return {gaussian_map(c, grid, sigma)};
}

Tensor map_tensor(const ProbMap& m) {
    const auto v = m.values();
    return Tensor::from({std::size_t(m.grid().height), std::size_t(m.grid().width)}, {v.begin(), v.end()});
}

Tensor kl_div(const Tensor& p, const Tensor& q) {
    if (p.numel() != q.numel()) throw ShapeError("kl_div: grid mismatch");
    const auto P = p.data();
    const auto Q = q.data();
    double total = 0.0;
    for (std::size_t j = 0; j < P.size(); ++j)
        if (!(P[j] == 0.0)) total += P[j] * std::log(P[j] / Q[j]);
    return ad::make_result({1}, {total}, {p, q}, [](ad::Node& n) {
        auto& np = *n.parents[0];
        auto& nq = *n.parents[1];
        const double g = n.grad[0];
        if (np.requires_grad)
            for (std::size_t j = 0; j < np.data.size(); ++j)
                np.grad[j] += g * (std::log(std::max(np.data[j], kTiny) / nq.data[j]) + 1.0);
        if (nq.requires_grad)
            for (std::size_t j = 0; j < np.data.size(); ++j) nq.grad[j] -= g * np.data[j] / nq.data[j];
    });
}

double soft_min(std::span<const double> values, double gamma) {
    require_gamma(gamma);
    if (values.empty()) throw ParameterError("soft_min: empty list");
    const double m = *std::min_element(values.begin(), values.end());
    double s = 0.0;
    for (double a : values) s += std::exp(-(a - m) / gamma);
    return m - gamma * std::log(s);
}

Tensor soft_min(std::span<const Tensor> values, double gamma) {
    require_gamma(gamma);
    if (values.empty()) throw ParameterError("soft_min: empty list");
    std::vector<double> a(values.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = values[i].item();
    const double out = soft_min(a, gamma);
    // d out / d a_i = softmax(-a / gamma)_i
    std::vector<double> weights(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) weights[i] = std::exp(-(a[i] - out) / gamma);
    return ad::make_result({1}, {out}, {values.begin(), values.end()}, [weights](ad::Node& n) {
        for (std::size_t i = 0; i < n.parents.size(); ++i)
            if (n.parents[i]->requires_grad) n.parents[i]->grad[0] += n.grad[0] * weights[i];
    });
}

double dtw(std::span<const double> cost, std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0 || cost.size() != rows * cols) throw ParameterError("dtw: bad cost matrix");
    std::vector<double> R((rows + 1) * (cols + 1), kInf);
    R[0] = 0.0;
    for (std::size_t i = 1; i <= rows; ++i)
        for (std::size_t j = 1; j <= cols; ++j)
            R[i * (cols + 1) + j] = cost[(i - 1) * cols + j - 1] +
                                    std::min({R[(i - 1) * (cols + 1) + j - 1], R[(i - 1) * (cols + 1) + j],
                                              R[i * (cols + 1) + j - 1]});
    return R.back();
}

double soft_dtw(std::span<const double> cost, std::size_t rows, std::size_t cols, double gamma) {
    require_gamma(gamma);
    if (rows == 0 || cols == 0 || cost.size() != rows * cols) throw ParameterError("soft_dtw: bad cost matrix");
    const auto R = soft_dtw_table(cost, rows, cols, gamma);
    return R[rows * (cols + 2) + cols];
}

Tensor soft_dtw(const Tensor& delta, double gamma) {
    require_gamma(gamma);
    if (delta.rank() != 2) throw ShapeError("soft_dtw: cost matrix must be [n, m]");
    const std::size_t n = delta.dim(0), m = delta.dim(1);
    auto R = soft_dtw_table(delta.data(), n, m, gamma);
    const double value = R[n * (m + 2) + m];
    return ad::make_result({1}, {value}, {delta}, [R = std::move(R), n, m, gamma](ad::Node& node) {
        auto& p = *node.parents[0];
        const auto e = soft_dtw_alignment(p.data, R, n, m, gamma);
        for (std::size_t i = 0; i < e.size(); ++i) p.grad[i] += node.grad[0] * e[i];
    });
}

double lambda_schedule(std::size_t t, const LossConfig& cfg) {
    return cfg.lambda_base + cfg.lambda_slope * std::log(double(t) + 1.0);
}

namespace {

Tensor regularizer(const Tensor& predicted, const Tensor& prior, double lambda) {
    return ad::scalar_mul(ad::reciprocal(ad::clamp_min(kl_div(predicted, prior), kRegularizerFloor)), lambda);
}

void require_grid(const Tensor& predicted, const ProbMap& m) {
    if (predicted.numel() != m.size()) throw ShapeError("prediction and target grids differ");
}

}  // namespace

Tensor pairwise_cost(const Tensor& predicted, const ProbMap& target, double lambda, const CenterPrior& prior) {
    require_grid(predicted, target);
    auto kl = kl_div(predicted, map_tensor(target));
    if (lambda == 0.0) return kl;
    return ad::add(kl, regularizer(predicted, map_tensor(prior.map), lambda));
}

Tensor kl_dtw_loss(std::span<const Tensor> predicted, std::span<const SpatializedScanpath> targets,
                   const LossConfig& cfg, const CenterPrior& prior) {
    if (targets.empty()) throw ParameterError("kl_dtw_loss: empty ground-truth set");
    if (predicted.empty()) throw ParameterError("kl_dtw_loss: empty prediction");
    const std::size_t n = predicted.size();

    // The regularizer depends only on the predicted frame; share it across targets.
    const auto prior_t = map_tensor(prior.map);
    std::vector<Tensor> reg(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double lambda = lambda_schedule(i, cfg);
        if (lambda != 0.0) reg[i] = regularizer(predicted[i], prior_t, lambda);
    }

    std::vector<Tensor> per_target;
    per_target.reserve(targets.size());
    for (const auto& target : targets) {
        if (target.empty()) throw ParameterError("kl_dtw_loss: empty ground-truth scanpath");
        const std::size_t m = target.size();
        std::vector<Tensor> target_t;
        target_t.reserve(m);
        for (const auto& g : target) target_t.push_back(map_tensor(g));
        std::vector<Tensor> cells;
        cells.reserve(n * m);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                require_grid(predicted[i], target[j]);
                auto kl = kl_div(predicted[i], target_t[j]);
                cells.push_back(reg[i].defined() ? ad::add(kl, reg[i]) : kl);
            }
        per_target.push_back(soft_dtw(ad::stack_scalars(cells, n, m), cfg.gamma));
    }
    return ad::scalar_mul(ad::sum_scalars(per_target), 1.0 / double(targets.size()));
}

}  // namespace scanpath::loss
