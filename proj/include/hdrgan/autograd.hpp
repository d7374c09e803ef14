#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace hdrgan {
class Rng;
}

// Minimal reverse-mode automatic differentiation over dense NCHW tensors.
// Graphs are built eagerly by the op functions below and released when the
// last Var referencing them goes away.
namespace hdrgan::ag {

struct Shape {
    int n = 0, c = 0, h = 0, w = 0;

    std::size_t numel() const noexcept {
        return static_cast<std::size_t>(n) * c * h * w;
    }
    std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * w; }
    friend bool operator==(const Shape&, const Shape&) = default;
    std::string str() const;
};

struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0) : shape(s), data(s.numel(), fill) {}
    Tensor(Shape s, std::vector<double> values);

    std::size_t numel() const noexcept { return data.size(); }
    double& at(int n, int c, int y, int x) noexcept {
        return data[((static_cast<std::size_t>(n) * shape.c + c) * shape.h + y) * shape.w + x];
    }
    double at(int n, int c, int y, int x) const noexcept {
        return data[((static_cast<std::size_t>(n) * shape.c + c) * shape.h + y) * shape.w + x];
    }
    friend bool operator==(const Tensor&, const Tensor&) = default;
};

struct Node {
    Tensor value;
    Tensor grad;  // allocated on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;

    // Returns the gradient buffer, zero-initialising it if needed.
    Tensor& grad_buffer();
};

class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    const Tensor& value() const { return node_->value; }
    Tensor& mutable_value() { return node_->value; }
    const Shape& shape() const { return node_->value.shape; }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    bool has_grad() const { return node_ && !node_->grad.data.empty(); }
    // Empty tensor when no gradient has been accumulated.
    const Tensor& grad() const { return node_->grad; }
    void zero_grad() { node_->grad = Tensor(); }
    // Scalar value of a single-element tensor.
    double item() const;

    Node* node() const { return node_.get(); }
    const std::shared_ptr<Node>& ptr() const { return node_; }
    explicit operator bool() const { return static_cast<bool>(node_); }

private:
    std::shared_ptr<Node> node_;
};

// Leaf without gradient.
Var constant(Tensor value);
// Leaf that accumulates gradient.
Var parameter(Tensor value);
// Same value, cut from the graph.
Var detach(const Var& v);

// Accumulates d(loss)/d(leaf) into every reachable leaf requiring grad.
void backward(const Var& loss);

bool grad_enabled() noexcept;

// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

// ---- ops -------------------------------------------------------------------

// weight: [cout, cin, k, k]; bias: [1, cout, 1, 1] or empty Var. Zero padding.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
// x: [n,c,h,w], s: [n,1,h,w]; s broadcast across channels.
Var mul_spatial(const Var& x, const Var& s);
// alpha * a + (1 - alpha) * b with alpha: [n,1,h,w] constant.
Var blend(const Var& a, const Var& b, const Tensor& alpha);

Var relu(const Var& x);
Var leaky_relu(const Var& x, double slope);
Var sigmoid(const Var& x);
Var softplus(const Var& x);
Var abs(const Var& x);

// Per-sample, per-channel normalisation without affine parameters.
Var instance_norm(const Var& x, double eps = 1e-5);
Var concat_channels(const Var& a, const Var& b);
Var upsample_nearest(const Var& x, int factor);
Var avg_pool2(const Var& x);
// Inverted dropout: kept activations are scaled by 1/(1-rate).
Var dropout(const Var& x, double rate, Rng& rng);

// ln(1 + mu x) / ln(1 + mu); throws DomainError on negative input.
Var mu_tonemap(const Var& x, double mu);

Var sum(const Var& x);
Var mean(const Var& x);
// Euclidean norm of all elements; gradient taken as 0 at the origin.
Var l2_norm(const Var& x);
// Mean binary cross-entropy of sigmoid(logits) against a constant label.
Var bce_with_logits(const Var& logits, double target);

}  // namespace hdrgan::ag
