#include "scanpath/ops.hpp"

#include <algorithm>
#include <cmath>

namespace scanpath::ad {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
}

// Output = f(x) elementwise; dfdx(x, y) gives the local derivative.
template <class F, class D>
Tensor unary(const Tensor& x, F f, D dfdx) {
    const auto in = x.data();
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
    return make_result(x.shape(), std::move(out), {x}, [dfdx](Node& n) {
        auto& p = *n.parents[0];
        for (std::size_t i = 0; i < n.data.size(); ++i) p.grad[i] += n.grad[i] * dfdx(p.data[i], n.data[i]);
    });
}

double stable_softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double stable_sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Node& n) {
        for (auto& p : n.parents)
            if (p->requires_grad)
                for (std::size_t i = 0; i < n.grad.size(); ++i) p->grad[i] += n.grad[i];
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Node& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        if (pa.requires_grad)
            for (std::size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i];
        if (pb.requires_grad)
            for (std::size_t i = 0; i < n.grad.size(); ++i) pb.grad[i] -= n.grad[i];
    });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "hadamard");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Node& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        if (pa.requires_grad)
            for (std::size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i] * pb.data[i];
        if (pb.requires_grad)
            for (std::size_t i = 0; i < n.grad.size(); ++i) pb.grad[i] += n.grad[i] * pa.data[i];
    });
}

Tensor scalar_mul(const Tensor& a, double s) {
    return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
    return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor sigmoid(const Tensor& x) {
    return unary(x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
    return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor softplus(const Tensor& x) {
    return unary(x, stable_softplus, [](double v, double) { return stable_sigmoid(v); });
}

Tensor reciprocal(const Tensor& x) {
    return unary(x, [](double v) { return 1.0 / v; }, [](double, double y) { return -y * y; });
}

Tensor clamp_min(const Tensor& x, double floor) {
    return unary(x, [floor](double v) { return std::max(v, floor); },
                 [floor](double v, double) { return v > floor ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& x) {
    double total = 0.0;
    for (double v : x.data()) total += v;
    return make_result({1}, {total}, {x}, [](Node& n) {
        auto& p = *n.parents[0];
        for (auto& g : p.grad) g += n.grad[0];
    });
}

Tensor sum_scalars(std::span<const Tensor> xs) {
    double total = 0.0;
    for (const auto& x : xs) total += x.item();
    return make_result({1}, {total}, {xs.begin(), xs.end()}, [](Node& n) {
        for (auto& p : n.parents)
            if (p->requires_grad) p->grad[0] += n.grad[0];
    });
}

Tensor map_softmax(const Tensor& x) {
    const auto in = x.data();
    const double mx = *std::max_element(in.begin(), in.end());
    std::vector<double> out(in.size());
    double total = 0.0;
    for (std::size_t i = 0; i < in.size(); ++i) total += out[i] = std::exp(in[i] - mx);
    for (auto& v : out) v /= total;
    return make_result(x.shape(), std::move(out), {x}, [](Node& n) {
        auto& p = *n.parents[0];
        double dot = 0.0;
        for (std::size_t i = 0; i < n.data.size(); ++i) dot += n.grad[i] * n.data[i];
        for (std::size_t i = 0; i < n.data.size(); ++i) p.grad[i] += n.data[i] * (n.grad[i] - dot);
    });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (numel(shape) != x.numel()) throw ShapeError("reshape: element count mismatch");
    std::vector<double> out(x.data().begin(), x.data().end());
    return make_result(std::move(shape), std::move(out), {x}, [](Node& n) {
        auto& p = *n.parents[0];
        for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
    });
}

Tensor concat(std::span<const Tensor> xs) {
    if (xs.empty()) throw ShapeError("concat: no inputs");
    Shape shape = xs[0].shape();
    std::size_t rows = 0;
    for (const auto& x : xs) {
        if (x.rank() != shape.size() || !std::equal(x.shape().begin() + 1, x.shape().end(), shape.begin() + 1))
            throw ShapeError("concat: trailing dimensions differ");
        rows += x.dim(0);
    }
    shape[0] = rows;
    std::vector<double> out;
    out.reserve(numel(shape));
    for (const auto& x : xs) out.insert(out.end(), x.data().begin(), x.data().end());
    return make_result(std::move(shape), std::move(out), {xs.begin(), xs.end()}, [](Node& n) {
        std::size_t offset = 0;
        for (auto& p : n.parents) {
            if (p->requires_grad)
                for (std::size_t i = 0; i < p->data.size(); ++i) p->grad[i] += n.grad[offset + i];
            offset += p->data.size();
        }
    });
}

Tensor slice(const Tensor& x, std::size_t begin, std::size_t end) {
    if (begin >= end || end > x.dim(0)) throw ShapeError("slice: bad range");
    const std::size_t stride = x.numel() / x.dim(0);
    Shape shape = x.shape();
    shape[0] = end - begin;
    std::vector<double> out(x.data().begin() + begin * stride, x.data().begin() + end * stride);
    const std::size_t offset = begin * stride;
    return make_result(std::move(shape), std::move(out), {x}, [offset](Node& n) {
        auto& p = *n.parents[0];
        for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[offset + i] += n.grad[i];
    });
}

Tensor stack_scalars(std::span<const Tensor> xs, std::size_t rows, std::size_t cols) {
    if (xs.size() != rows * cols || xs.empty()) throw ShapeError("stack_scalars: count does not match rows*cols");
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = xs[i].item();
    return make_result({rows, cols}, std::move(out), {xs.begin(), xs.end()}, [](Node& n) {
        for (std::size_t i = 0; i < n.parents.size(); ++i)
            if (n.parents[i]->requires_grad) n.parents[i]->grad[0] += n.grad[i];
    });
}

namespace {

struct ConvDims {
    std::size_t cin, cout, h, w, k;
    std::ptrdiff_t pad;
};

// Calls fn(co, ci, ky, kx, y0, y1, x0, x1, dy, dx) for every kernel tap with
// the output range whose shifted input stays in bounds.
template <class Fn>
void for_each_tap(const ConvDims& d, Fn fn) {
    const auto H = static_cast<std::ptrdiff_t>(d.h);
    const auto W = static_cast<std::ptrdiff_t>(d.w);
    for (std::size_t co = 0; co < d.cout; ++co)
        for (std::size_t ci = 0; ci < d.cin; ++ci)
            for (std::size_t ky = 0; ky < d.k; ++ky) {
                const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - d.pad;
                const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -dy), y1 = std::min(H, H - dy);
                for (std::size_t kx = 0; kx < d.k; ++kx) {
                    const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - d.pad;
                    const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx), x1 = std::min(W, W - dx);
                    fn(co, ci, ky, kx, y0, y1, x0, x1, dy, dx);
                }
            }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
    if (input.rank() != 3 || kernel.rank() != 4 || bias.rank() != 1)
        throw ShapeError("conv2d: expected input [C,H,W], kernel [O,C,k,k], bias [O]");
    const std::size_t k = kernel.dim(2);
    if (kernel.dim(3) != k || k % 2 == 0) throw ShapeError("conv2d: kernel must be square with odd size");
    if (kernel.dim(1) != input.dim(0))
        throw ShapeError("conv2d: kernel expects " + std::to_string(kernel.dim(1)) + " input channels, got " +
                         std::to_string(input.dim(0)));
    if (bias.dim(0) != kernel.dim(0)) throw ShapeError("conv2d: bias length differs from output channels");

    const ConvDims d{input.dim(0), kernel.dim(0), input.dim(1), input.dim(2), k,
                     static_cast<std::ptrdiff_t>(k / 2)};
    const std::size_t hw = d.h * d.w;
    const double* in = input.data().data();
    const double* K = kernel.data().data();
    std::vector<double> out(d.cout * hw);
    for (std::size_t co = 0; co < d.cout; ++co) std::fill_n(out.begin() + co * hw, hw, bias.data()[co]);

    for_each_tap(d, [&](auto co, auto ci, auto ky, auto kx, auto y0, auto y1, auto x0, auto x1, auto dy, auto dx) {
        const double wv = K[((co * d.cin + ci) * d.k + ky) * d.k + kx];
        if (wv == 0.0) return;
        for (auto y = y0; y < y1; ++y) {
            double* o = out.data() + co * hw + static_cast<std::size_t>(y) * d.w;
            const double* src = in + static_cast<std::ptrdiff_t>(ci * hw) + (y + dy) * static_cast<std::ptrdiff_t>(d.w) + dx;
            for (auto x = x0; x < x1; ++x) o[x] += wv * src[x];
        }
    });

    return make_result({d.cout, d.h, d.w}, std::move(out), {input, kernel, bias}, [d](Node& n) {
        auto& pin = *n.parents[0];
        auto& pk = *n.parents[1];
        auto& pb = *n.parents[2];
        const std::size_t hw = d.h * d.w;
        const double* g = n.grad.data();
        if (pb.requires_grad)
            for (std::size_t co = 0; co < d.cout; ++co) {
                double s = 0.0;
                for (std::size_t i = 0; i < hw; ++i) s += g[co * hw + i];
                pb.grad[co] += s;
            }
        const bool want_in = pin.requires_grad, want_k = pk.requires_grad;
        if (!want_in && !want_k) return;
        for_each_tap(d, [&](auto co, auto ci, auto ky, auto kx, auto y0, auto y1, auto x0, auto x1, auto dy, auto dx) {
            const std::size_t widx = ((co * d.cin + ci) * d.k + ky) * d.k + kx;
            const double wv = pk.data[widx];
            double acc = 0.0;
            for (auto y = y0; y < y1; ++y) {
                const double* go = g + co * hw + static_cast<std::size_t>(y) * d.w;
                const auto row = static_cast<std::ptrdiff_t>(ci * hw) + (y + dy) * static_cast<std::ptrdiff_t>(d.w) + dx;
                if (want_in && wv != 0.0) {
                    double* gi = pin.grad.data() + row;
                    for (auto x = x0; x < x1; ++x) gi[x] += wv * go[x];
                }
                if (want_k) {
                    const double* src = pin.data.data() + row;
                    for (auto x = x0; x < x1; ++x) acc += go[x] * src[x];
                }
            }
            if (want_k) pk.grad[widx] += acc;
        });
    });
}

}  // namespace scanpath::ad
