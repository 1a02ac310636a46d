#pragma once

// Reference implementations used only by tests. They share no code with the
// library beyond plain data types.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "scanpath/rng.hpp"

namespace oracle {

using Vec = std::vector<double>;

inline Vec random_vec(std::size_t n, scanpath::Rng& rng, double lo = -1.0, double hi = 1.0) {
    Vec v(n);
    for (auto& e : v) e = lo + (hi - lo) * rng.uniform();
    return v;
}

/// Direct quadruple loop, zero padding, odd k.
inline Vec conv2d(const Vec& in, std::size_t C, std::size_t H, std::size_t W, const Vec& kernel, std::size_t O,
                  std::size_t k, const Vec& bias) {
    Vec out(O * H * W, 0.0);
    const long r = long(k) / 2;
    for (std::size_t o = 0; o < O; ++o)
        for (long y = 0; y < long(H); ++y)
            for (long x = 0; x < long(W); ++x) {
                double s = bias[o];
                for (std::size_t c = 0; c < C; ++c)
                    for (long dy = -r; dy <= r; ++dy)
                        for (long dx = -r; dx <= r; ++dx) {
                            const long yy = y + dy, xx = x + dx;
                            if (yy < 0 || xx < 0 || yy >= long(H) || xx >= long(W)) continue;
                            s += in[(c * H + yy) * W + xx] * kernel[((o * C + c) * k + (dy + r)) * k + (dx + r)];
                        }
                out[(o * H + y) * W + x] = s;
            }
    return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Eq.-style ConvLSTM cell on plain vectors. Returns (h, c).
inline std::pair<Vec, Vec> convlstm(const Vec& x, std::size_t Cx, const Vec& h, const Vec& c, std::size_t hidden,
                                    std::size_t H, std::size_t W, const Vec& kernel, std::size_t k, const Vec& bias) {
    Vec in(x);
    in.insert(in.end(), h.begin(), h.end());
    const Vec z = conv2d(in, Cx + hidden, H, W, kernel, 4 * hidden, k, bias);
    const std::size_t P = hidden * H * W;
    Vec hn(P), cn(P);
    for (std::size_t j = 0; j < P; ++j) {
        const double i = sigmoid(z[j]), f = sigmoid(z[P + j]), o = sigmoid(z[2 * P + j]), g = std::tanh(z[3 * P + j]);
        cn[j] = f * c[j] + i * g;
        hn[j] = o * std::tanh(cn[j]);
    }
    return {hn, cn};
}

inline double kl(const Vec& p, const Vec& q) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * std::log(p[i] / q[i]);
    return s;
}

/// All monotone alignment paths from (0,0) to (n-1,m-1) with unit steps.
inline std::vector<std::vector<std::pair<std::size_t, std::size_t>>> alignments(std::size_t n, std::size_t m) {
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> out;
    std::vector<std::pair<std::size_t, std::size_t>> path{{0, 0}};
    std::function<void(std::size_t, std::size_t)> walk = [&](std::size_t i, std::size_t j) {
        if (i == n - 1 && j == m - 1) {
            out.push_back(path);
            return;
        }
        const std::pair<std::size_t, std::size_t> steps[] = {{i + 1, j}, {i, j + 1}, {i + 1, j + 1}};
        for (auto [a, b] : steps) {
            if (a >= n || b >= m) continue;
            path.emplace_back(a, b);
            walk(a, b);
            path.pop_back();
        }
    };
    walk(0, 0);
    return out;
}

inline Vec path_costs(const Vec& cost, std::size_t n, std::size_t m) {
    Vec out;
    for (const auto& p : alignments(n, m)) {
        double s = 0.0;
        for (auto [i, j] : p) s += cost[i * m + j];
        out.push_back(s);
    }
    return out;
}

inline double brute_dtw(const Vec& cost, std::size_t n, std::size_t m) {
    const auto c = path_costs(cost, n, m);
    return *std::min_element(c.begin(), c.end());
}

/// -gamma log sum exp(-c/gamma) over all alignment path costs.
inline double brute_soft_dtw(const Vec& cost, std::size_t n, std::size_t m, double gamma) {
    const auto c = path_costs(cost, n, m);
    const double lo = *std::min_element(c.begin(), c.end());
    double s = 0.0;
    for (double v : c) s += std::exp(-(v - lo) / gamma);
    return lo - gamma * std::log(s);
}

/// Central differences of f at x.
inline Vec numeric_gradient(const std::function<double(const Vec&)>& f, Vec x, double h = 1e-4) {
    Vec g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f(x);
        x[i] = keep - h;
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

/// Largest |a - n| / max(|a|, |n|, floor) over coordinates.
inline double max_relative_error(const Vec& analytic, const Vec& numeric, double floor) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double d = std::abs(analytic[i] - numeric[i]);
        worst = std::max(worst, d / std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor}));
    }
    return worst;
}

/// Gaussian on a grid with epsilon floor, straight from the formula.
inline Vec gaussian(double px, double py, int W, int H, double sigma, double eps = 1e-12) {
    Vec v(std::size_t(W) * H);
    double total = 0.0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double e = std::exp(-((x - px) * (x - px) + (y - py) * (y - py)) / (2 * sigma * sigma));
            v[std::size_t(y) * W + x] = e;
            total += e;
        }
    for (auto& e : v) e = e / total * (1.0 - eps * double(v.size())) + eps;
    return v;
}

inline Vec softmax(const Vec& z) {
    const double m = *std::max_element(z.begin(), z.end());
    Vec out(z.size());
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) s += out[i] = std::exp(z[i] - m);
    for (auto& e : out) e /= s;
    return out;
}

}  // namespace oracle
