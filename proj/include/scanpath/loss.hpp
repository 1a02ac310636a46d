#pragma once

#include <span>
#include <vector>

#include "scanpath/core_types.hpp"
#include "scanpath/tensor.hpp"

namespace scanpath::loss {

using ad::Tensor;

struct LossConfig {
    double gamma = 0.1;         // soft-min temperature
    double lambda_base = 0.05;  // a in a + b ln(t + 1)
    double lambda_slope = 0.05; // b
    double sigma = 2.0;         // spatialization std in grid pixels
};

/// Floor on D_KL(prediction || center prior) inside the regularizer.
inline constexpr double kRegularizerFloor = 1e-6;

/// Center-bias prior: Gaussian map at the grid centre.
struct CenterPrior {
    ProbMap map;
    static CenterPrior for_grid(const GridSpec& grid, double sigma);
};

/// Map as a constant tensor of shape [H, W].
Tensor map_tensor(const ProbMap& m);

/// D_KL(P || Q) = sum_j P_j ln(P_j / Q_j); differentiable in both.
Tensor kl_div(const Tensor& p, const Tensor& q);

/// -gamma ln sum exp(-a_i / gamma), max-shift stabilized.
double soft_min(std::span<const double> values, double gamma);
Tensor soft_min(std::span<const Tensor> values, double gamma);

/// Hard DTW (gamma -> 0 limit), used by metrics and as an oracle.
double dtw(std::span<const double> cost, std::size_t rows, std::size_t cols);

/// Soft-DTW over a [n, m] cost matrix; gradient via the expected-alignment
/// backward recursion.
Tensor soft_dtw(const Tensor& delta, double gamma);
double soft_dtw(std::span<const double> cost, std::size_t rows, std::size_t cols, double gamma);

/// lambda_CB(t) = a + b ln(t + 1).
double lambda_schedule(std::size_t t, const LossConfig& cfg);

/// D_KL(r || g) + lambda / max(D_KL(r || g_c), floor).
Tensor pairwise_cost(const Tensor& predicted, const ProbMap& target, double lambda, const CenterPrior& prior);

/// Mean over ground-truth scanpaths of soft-DTW on the pairwise-cost matrix.
/// Row i of the cost matrix uses lambda_schedule(i). Each target is a
/// spatialized ground-truth scanpath on the prediction grid.
Tensor kl_dtw_loss(std::span<const Tensor> predicted, std::span<const SpatializedScanpath> targets,
                   const LossConfig& cfg, const CenterPrior& prior);

}  // namespace scanpath::loss
