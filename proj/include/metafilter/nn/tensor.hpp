#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "metafilter/errors.hpp"

namespace metafilter::nn {

using Dims = std::vector<std::size_t>;

inline std::size_t product(const Dims& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string to_string(const Dims& dims) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
    os << ']';
    return os.str();
}

// Graph building is on by default; NoGradGuard switches it off for the
// current thread (evaluation passes, weight updates).
inline bool& grad_mode_flag() {
    thread_local bool enabled = true;
    return enabled;
}

class NoGradGuard {
public:
    NoGradGuard() : previous_(grad_mode_flag()) { grad_mode_flag() = false; }
    ~NoGradGuard() { grad_mode_flag() = previous_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

template <class Real>
struct Node {
    Dims dims;
    std::vector<Real> values;
    std::vector<Real> grad;  // empty until a gradient is first written
    bool requires_grad = false;
    bool leaf = true;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    /// Gradient buffer of this node, allocated (zeroed) on first use.
    std::span<Real> grad_buffer() {
        if (grad.size() != values.size()) grad.assign(values.size(), Real(0));
        return grad;
    }
};

/// Shared handle to a node of the computation graph. Copies alias the same
/// storage; use clone() for an independent copy.
template <class Real>
class Tensor {
public:
    using value_type = Real;
    using NodePtr = std::shared_ptr<Node<Real>>;

    Tensor() : node_(std::make_shared<Node<Real>>()) {}

    Tensor(Dims dims, std::vector<Real> values, bool requires_grad = false) : node_(std::make_shared<Node<Real>>()) {
        if (product(dims) != values.size())
            throw ShapeError("tensor dims " + to_string(dims) + " hold " + std::to_string(product(dims)) +
                             " values, got " + std::to_string(values.size()));
        for (auto d : dims)
            if (d == 0) throw ShapeError("tensor dims must be positive, got " + to_string(dims));
        node_->dims = std::move(dims);
        node_->values = std::move(values);
        node_->requires_grad = requires_grad;
    }

    static Tensor zeros(Dims dims, bool requires_grad = false) {
        const auto n = product(dims);
        return Tensor(std::move(dims), std::vector<Real>(n, Real(0)), requires_grad);
    }

    static Tensor full(Dims dims, Real value, bool requires_grad = false) {
        const auto n = product(dims);
        return Tensor(std::move(dims), std::vector<Real>(n, value), requires_grad);
    }

    static Tensor scalar(Real value, bool requires_grad = false) { return Tensor({1}, {value}, requires_grad); }

    static Tensor from_node(NodePtr node) {
        Tensor t;
        t.node_ = std::move(node);
        return t;
    }

    const Dims& dims() const { return node_->dims; }
    std::size_t dim(std::size_t i) const { return node_->dims.at(i); }
    std::size_t rank() const { return node_->dims.size(); }
    std::size_t numel() const { return node_->values.size(); }

    std::span<Real> values() { return node_->values; }
    std::span<const Real> values() const { return node_->values; }
    Real operator[](std::size_t i) const { return node_->values[i]; }
    Real item() const {
        if (numel() != 1) throw ShapeError("item() on tensor with dims " + to_string(dims()));
        return node_->values[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) {
        if (!node_->leaf) throw StateError("requires_grad can only be toggled on leaf tensors");
        node_->requires_grad = on;
    }
    bool is_leaf() const { return node_->leaf; }
    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const Real> grad() const { return node_->grad; }
    std::span<Real> grad() { return node_->grad; }

    /// Zero (allocating if needed) the gradient slot.
    void zero_grad() { node_->grad.assign(node_->values.size(), Real(0)); }

    Tensor clone(bool requires_grad = false) const { return Tensor(dims(), node_->values, requires_grad); }
    Tensor detach() const { return clone(false); }

    Node<Real>& node() const { return *node_; }
    const NodePtr& node_ptr() const { return node_; }
    bool same_storage(const Tensor& other) const { return node_ == other.node_; }

private:
    NodePtr node_;
};

/// Builds the result of an operation. When graph mode is on and any input
/// tracks gradients, the result records its parents and backward closure.
template <class Real, class Fn>
Tensor<Real> make_result(Dims dims, std::vector<Real> values, std::initializer_list<Tensor<Real>> inputs, const char* op,
                         Fn&& backward) {
    auto node = std::make_shared<Node<Real>>();
    node->dims = std::move(dims);
    node->values = std::move(values);
    node->op = op;
    bool track = false;
    if (grad_mode_flag())
        for (const auto& in : inputs) track = track || in.requires_grad();
    if (track) {
        node->requires_grad = true;
        node->leaf = false;
        for (const auto& in : inputs) node->parents.push_back(in.node_ptr());
        node->backward_fn = std::forward<Fn>(backward);
    }
    return Tensor<Real>::from_node(std::move(node));
}

/// Gradient slot of parent i when it needs one, else an empty span.
template <class Real>
std::span<Real> parent_grad(Node<Real>& self, std::size_t i) {
    auto& p = *self.parents[i];
    if (!p.requires_grad) return {};
    return p.grad_buffer();
}

/// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate across
/// calls; intermediate gradients are recomputed from scratch on every call.
template <class Real>
void backward(const Tensor<Real>& loss) {
    if (loss.numel() != 1) throw ShapeError("backward() needs a scalar loss, got dims " + to_string(loss.dims()));
    if (!loss.requires_grad()) throw StateError("backward() on a tensor that does not track gradients");

    std::vector<Node<Real>*> order;
    std::unordered_set<Node<Real>*> seen;
    std::vector<std::pair<Node<Real>*, std::size_t>> stack{{&loss.node(), 0}};
    seen.insert(&loss.node());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            Node<Real>* p = n->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    // order is post-order: parents before children.
    for (auto* n : order)
        if (!n->leaf) n->grad.assign(n->values.size(), Real(0));
    loss.node().grad_buffer()[0] += Real(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if (!(*it)->leaf && (*it)->backward_fn) (*it)->backward_fn(**it);
}

}  // namespace metafilter::nn
