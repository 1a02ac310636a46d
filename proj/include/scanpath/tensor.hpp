#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "scanpath/errors.hpp"

namespace scanpath::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& s);
std::string to_string(const Shape& s);

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// Propagates node.grad into the grads of node.parents.
using BackwardFn = std::function<void(Node&)>;

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until needed
    bool requires_grad = false;
    bool backward_done = false;
    std::vector<NodePtr> parents;
    BackwardFn backward;

    std::vector<double>& ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
        return grad;
    }
};

/// Dense row-major double tensor taking part in reverse-mode differentiation.
///
/// Tensor is a cheap shared handle. Leaves created with requires_grad=true
/// accumulate gradients across backward() calls until zero_grad().
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(NodePtr node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t numel() const { return node_->data.size(); }

    std::span<const double> data() const { return node_->data; }
    /// Direct write access; intended for leaves (parameters, inputs).
    std::span<double> mutable_data() { return node_->data; }
    double item() const;

    bool requires_grad() const { return node_->requires_grad; }
    /// Gradient after backward(); zeros when never reached.
    std::span<const double> grad() const;
    void zero_grad();

    /// Reverse pass from this scalar. Calling it twice on the same root throws.
    void backward();

    /// Copy of the values with no graph attached.
    Tensor detach() const;

    Node& node() const { return *node_; }
    const NodePtr& node_ptr() const { return node_; }

private:
    NodePtr node_;
};

/// Whether new ops record their parents. Thread-local.
bool grad_enabled();

/// Disables graph recording for its lifetime (inference).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// Builds a result node. parents are recorded (and backward attached) only
/// when grad mode is on and at least one parent requires grad.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents, BackwardFn backward);

}  // namespace scanpath::ad
