#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "scanpath/loss.hpp"
#include "scanpath/ops.hpp"

using namespace scanpath;
using namespace scanpath::loss;
using ad::Tensor;

namespace {

Tensor t2(std::vector<double> v) {
    const std::size_t n = v.size();
    return Tensor::from({1, n}, std::move(v));
}

std::vector<double> random_cost(std::size_t n, Rng& rng) { return oracle::random_vec(n, rng, 0.0, 3.0); }

ProbMap random_map(const GridSpec& g, Rng& rng) {
    return gaussian_map({rng.uniform() * (g.width - 1), rng.uniform() * (g.height - 1)}, g, 0.8 + rng.uniform());
}

}  // namespace

TEST(KlDiv, HandValues) {
    EXPECT_NEAR(kl_div(t2({0.5, 0.5}), t2({0.25, 0.75})).item(), 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0),
                1e-15);
    EXPECT_NEAR(0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0), 0.14384, 1e-5);
    const double eps = 1e-12;
    EXPECT_NEAR(kl_div(t2({1 - eps, eps}), t2({0.5, 0.5})).item(), std::log(2.0), 1e-9);
    const auto m = map_tensor(gaussian_map({1, 2}, GridSpec(4, 4), 1.0));
    EXPECT_NEAR(kl_div(m, m).item(), 0.0, 1e-9);
    EXPECT_THROW(kl_div(t2({0.5, 0.5}), t2({0.2, 0.3, 0.5})), ShapeError);
}

TEST(KlDiv, NonnegativeOnRandomMaps) {
    Rng rng(1);
    const GridSpec g(5, 4);
    for (int i = 0; i < 50; ++i)
        EXPECT_GE(kl_div(map_tensor(random_map(g, rng)), map_tensor(random_map(g, rng))).item(), 0.0);
}

TEST(SoftMin, HandValues) {
    const double one[] = {1.7};
    EXPECT_NEAR(soft_min(one, 0.3), 1.7, 1e-15);
    const double ab[] = {1.0, 2.0};
    EXPECT_NEAR(soft_min(ab, 1.0), -std::log(std::exp(-1.0) + std::exp(-2.0)), 1e-15);
    EXPECT_NEAR(soft_min(ab, 1.0), 0.6867, 1e-4);
    EXPECT_NEAR(soft_min(ab, 1e-6), 1.0, 1e-5);
    EXPECT_LE(soft_min(ab, 0.5), 1.0);
    EXPECT_THROW(soft_min(std::span<const double>{}, 1.0), ParameterError);
    EXPECT_THROW(soft_min(ab, 0.0), ParameterError);
}

TEST(SoftMin, TensorVersionAgrees) {
    std::vector<Tensor> xs{Tensor::scalar(0.3), Tensor::scalar(-1.2), Tensor::scalar(2.0)};
    const double vs[] = {0.3, -1.2, 2.0};
    EXPECT_NEAR(soft_min(xs, 0.7).item(), soft_min(vs, 0.7), 1e-15);
}

TEST(SoftDtw, HandExamples) {
    const double c[] = {2.5};
    EXPECT_NEAR(soft_dtw(c, 1, 1, 0.1), 2.5, 1e-15);
    const std::vector<double> d{1, 2, 3, 1};
    EXPECT_NEAR(soft_dtw(d, 2, 2, 1e-6), 2.0, 1e-4);
    EXPECT_NEAR(soft_dtw(d, 2, 2, 1.0), -std::log(std::exp(-2.0) + std::exp(-4.0) + std::exp(-5.0)), 1e-9);
    EXPECT_NEAR(oracle::brute_soft_dtw(d, 2, 2, 1.0), soft_dtw(d, 2, 2, 1.0), 1e-9);
    EXPECT_NEAR(dtw(d, 2, 2), 2.0, 0.0);
    EXPECT_THROW(soft_dtw(std::span<const double>{}, 0, 0, 0.1), ParameterError);
}

TEST(SoftDtw, TensorMatchesScalarVersion) {
    Rng rng(2);
    const auto c = random_cost(12, rng);
    EXPECT_NEAR(soft_dtw(Tensor::from({3, 4}, c), 0.3).item(), soft_dtw(c, 3, 4, 0.3), 1e-12);
}

TEST(SoftDtw, BoundedByHardDtwAndConverges) {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto c = random_cost(25, rng);
        const double hard = oracle::brute_dtw(c, 5, 5);
        EXPECT_NEAR(dtw(c, 5, 5), hard, 1e-12);
        double prev_gap = std::numeric_limits<double>::infinity();
        for (double gamma : {1.0, 0.1, 0.01, 1e-4}) {
            const double s = soft_dtw(c, 5, 5, gamma);
            EXPECT_LE(s, hard + 1e-12);
            EXPECT_NEAR(s, oracle::brute_soft_dtw(c, 5, 5, gamma), 1e-9);
            EXPECT_LE(hard - s, prev_gap);
            prev_gap = hard - s;
        }
    }
}

TEST(SoftDtw, MonotoneInEachEntry) {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        auto c = random_cost(12, rng);
        const double base = soft_dtw(c, 3, 4, 0.1);
        c[rng.uniform_index(12)] += 0.5 * rng.uniform();
        EXPECT_GE(soft_dtw(c, 3, 4, 0.1), base);
    }
}

TEST(SoftDtw, GradientIsExpectedAlignment) {
    // d softDTW / d delta_ij = probability that a Gibbs-weighted path visits (i, j).
    Rng rng(5);
    const auto c = random_cost(9, rng);
    const double gamma = 0.5;
    auto x = Tensor::from({3, 3}, c, true);
    soft_dtw(x, gamma).backward();
    const auto paths = oracle::alignments(3, 3);
    const auto costs = oracle::path_costs(c, 3, 3);
    std::vector<double> expect(9, 0.0);
    double z = 0;
    for (std::size_t p = 0; p < paths.size(); ++p) {
        const double w = std::exp(-costs[p] / gamma);
        z += w;
        for (auto [i, j] : paths[p]) expect[i * 3 + j] += w;
    }
    for (std::size_t k = 0; k < 9; ++k) EXPECT_NEAR(x.grad()[k], expect[k] / z, 1e-12);
}

TEST(LambdaSchedule, Values) {
    EXPECT_EQ(lambda_schedule(0, {0.1, 0.3, 0.05, 2.0}), 0.3);
    EXPECT_NEAR(lambda_schedule(7, {0.1, 0.1, 0.05, 2.0}), 0.1 + 0.05 * std::log(8.0), 1e-15);
    EXPECT_NEAR(lambda_schedule(7, {0.1, 0.1, 0.05, 2.0}), 0.2040, 1e-4);
    const LossConfig pure{0.1, 0.0, 1.0, 2.0};
    for (std::size_t t1 = 0; t1 < 10; ++t1)
        for (std::size_t t2 = t1; t2 < 10; ++t2) {
            EXPECT_NEAR(lambda_schedule(t2, pure) - lambda_schedule(t1, pure), std::log((t2 + 1.0) / (t1 + 1.0)),
                        1e-12);
            EXPECT_GE(lambda_schedule(t2, pure), lambda_schedule(t1, pure));
        }
}

TEST(CenterPrior, ArgmaxAtCentre) {
    const auto p = CenterPrior::for_grid(GridSpec(9, 9), 1.0);
    EXPECT_EQ(map_argmax(p.map), (GazePoint{4, 4}));
}

TEST(PairwiseCost, ReducesToKlWithoutRegularizer) {
    const GridSpec g(6, 6);
    const auto prior = CenterPrior::for_grid(g, 1.5);
    Rng rng(6);
    const auto r = random_map(g, rng), s = random_map(g, rng);
    EXPECT_EQ(pairwise_cost(map_tensor(r), s, 0.0, prior).item(), kl_div(map_tensor(r), map_tensor(s)).item());
    EXPECT_NEAR(pairwise_cost(map_tensor(r), r, 0.0, prior).item(), 0.0, 1e-9);
}

TEST(PairwiseCost, CornerMapRegularizer) {
    const GridSpec g(6, 6);
    const auto prior = CenterPrior::for_grid(g, 1.5);
    const auto corner = gaussian_map({0, 0}, g, 1.5);
    const std::vector<double> cv(corner.values().begin(), corner.values().end());
    const std::vector<double> pv(prior.map.values().begin(), prior.map.values().end());
    const double expect = 0.1 / oracle::kl(cv, pv);
    EXPECT_NEAR(pairwise_cost(map_tensor(corner), corner, 0.1, prior).item(), expect, 1e-12);
}

TEST(PairwiseCost, FloorGuardsPredictionAtPrior) {
    const GridSpec g(6, 6);
    const auto prior = CenterPrior::for_grid(g, 1.5);
    const auto other = gaussian_map({1, 1}, g, 1.5);
    const double kl_part = kl_div(map_tensor(prior.map), map_tensor(other)).item();
    const double v = pairwise_cost(map_tensor(prior.map), other, 0.1, prior).item();
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_NEAR(v, kl_part + 0.1 / kRegularizerFloor, 1e-6);
}

TEST(KlDtwLoss, PerfectPredictionIsZero) {
    const GridSpec g(5, 5);
    const Scanpath s{"i", "o", {{1, 1}, {3, 2}, {4, 4}}};
    const auto maps = spatialize(s, g, 1.0);
    std::vector<Tensor> pred;
    for (const auto& m : maps) pred.push_back(map_tensor(m));
    const std::vector<SpatializedScanpath> targets{maps};
    const LossConfig cfg{1e-6, 0.0, 0.0, 1.0};
    EXPECT_NEAR(kl_dtw_loss(pred, targets, cfg, CenterPrior::for_grid(g, 1.0)).item(), 0.0, 1e-6);
}

TEST(KlDtwLoss, DuplicateTargetsLeaveMeanUnchanged) {
    const GridSpec g(4, 4);
    Rng rng(7);
    std::vector<Tensor> pred{map_tensor(random_map(g, rng)), map_tensor(random_map(g, rng))};
    const SpatializedScanpath t{random_map(g, rng), random_map(g, rng)};
    const auto prior = CenterPrior::for_grid(g, 1.0);
    const LossConfig cfg;
    const std::vector<SpatializedScanpath> one{t}, two{t, t};
    EXPECT_NEAR(kl_dtw_loss(pred, one, cfg, prior).item(), kl_dtw_loss(pred, two, cfg, prior).item(), 1e-12);
    EXPECT_THROW(kl_dtw_loss(pred, std::span<const SpatializedScanpath>{}, cfg, prior), ParameterError);
}

TEST(KlDtwLoss, HandAssembledFromOracles) {
    // |S| = 2, 4x4 grid, 2-step sequences; cost matrices built from the KL
    // oracle and the schedule, then scored by exhaustive alignment.
    const GridSpec g(4, 4);
    Rng rng(8);
    const auto prior = CenterPrior::for_grid(g, 1.0);
    const std::vector<double> pv(prior.map.values().begin(), prior.map.values().end());
    const LossConfig cfg{0.3, 0.05, 0.05, 1.0};
    std::vector<ProbMap> pred_maps{random_map(g, rng), random_map(g, rng)};
    const std::vector<SpatializedScanpath> targets{{random_map(g, rng), random_map(g, rng)},
                                                   {random_map(g, rng), random_map(g, rng)}};
    double expect = 0;
    for (const auto& t : targets) {
        std::vector<double> cost(4);
        for (std::size_t i = 0; i < 2; ++i) {
            const std::vector<double> r(pred_maps[i].values().begin(), pred_maps[i].values().end());
            const double lambda = 0.05 + 0.05 * std::log(double(i) + 1.0);
            for (std::size_t j = 0; j < 2; ++j) {
                const std::vector<double> s(t[j].values().begin(), t[j].values().end());
                cost[i * 2 + j] = oracle::kl(r, s) + lambda / std::max(oracle::kl(r, pv), 1e-6);
            }
        }
        expect += oracle::brute_soft_dtw(cost, 2, 2, cfg.gamma) / 2.0;
    }
    std::vector<Tensor> pred{map_tensor(pred_maps[0]), map_tensor(pred_maps[1])};
    EXPECT_NEAR(kl_dtw_loss(pred, targets, cfg, prior).item(), expect, 1e-10);
}

TEST(KlDtwLoss, GradientMatchesFiniteDifferences) {
    // Gradient w.r.t. every pixel of length-3 predictions on a 4x4 grid.
    const GridSpec g(4, 4);
    Rng rng(9);
    const auto prior = CenterPrior::for_grid(g, 1.0);
    const std::vector<SpatializedScanpath> targets{{random_map(g, rng), random_map(g, rng), random_map(g, rng)},
                                                   {random_map(g, rng), random_map(g, rng)}};
    const LossConfig cfg;
    auto logits = Tensor::from({3, 4, 4}, oracle::random_vec(48, rng), true);
    auto f = [&](const Tensor& z) {
        std::vector<Tensor> pred;
        for (std::size_t i = 0; i < 3; ++i) pred.push_back(ad::map_softmax(ad::reshape(ad::slice(z, i, i + 1), {4, 4})));
        return kl_dtw_loss(pred, targets, cfg, prior);
    };
    f(logits).backward();
    const std::vector<double> analytic(logits.grad().begin(), logits.grad().end());
    const auto numeric = oracle::numeric_gradient(
        [&](const oracle::Vec& v) {
            ad::NoGradGuard ng;
            return f(Tensor::from({3, 4, 4}, v)).item();
        },
        {logits.data().begin(), logits.data().end()});
    EXPECT_LT(oracle::max_relative_error(analytic, numeric, 1e-3), 1e-3);
}
