#include "scanpath/tensor.hpp"

#include <algorithm>
#include <unordered_set>

namespace scanpath::ad {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t numel(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

std::string to_string(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const auto n = ad::numel(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    for (auto d : shape)
        if (d == 0) throw ShapeError("Tensor: zero-sized dimension in " + ad::to_string(shape));
    if (ad::numel(shape) != values.size())
        throw ShapeError("Tensor: " + std::to_string(values.size()) + " values for shape " + ad::to_string(shape));
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({1}, {v}, requires_grad); }

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item(): tensor is not a scalar");
    return node_->data[0];
}

std::span<const double> Tensor::grad() const {
    node_->ensure_grad();
    return node_->grad;
}

void Tensor::zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

Tensor Tensor::detach() const { return from(shape(), node_->data, false); }

void Tensor::backward() {
    if (numel() != 1) throw ShapeError("backward(): loss must be a scalar");
    if (node_->backward_done) throw Error("backward(): already called on this graph");

    // iterative post-order DFS gives a topological order
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            Node* p = n->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    for (Node* n : order)
        if (n->backward) n->grad.assign(n->data.size(), 0.0);  // interior nodes start clean
    node_->ensure_grad();
    node_->grad[0] += 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (!n->backward) continue;
        for (auto& p : n->parents)
            if (p->requires_grad) p->ensure_grad();
        n->backward(*n);
    }
    node_->backward_done = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents, BackwardFn backward) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    if (g_grad_enabled) {
        const bool any = std::any_of(parents.begin(), parents.end(),
                                     [](const Tensor& t) { return t.defined() && t.requires_grad(); });
        if (any) {
            node->requires_grad = true;
            node->backward = std::move(backward);
            node->parents.reserve(parents.size());
            for (auto& p : parents) node->parents.push_back(p.node_ptr());
        }
    }
    return Tensor(std::move(node));
}

}  // namespace scanpath::ad
