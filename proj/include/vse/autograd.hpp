#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "vse/tensor.hpp"

namespace vse {

using Rng = std::mt19937_64;

template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    bool has_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> inputs;
    // Reads this node's grad and accumulates into the grads of `inputs`.
    std::function<void(Node&)> backward;

    Tensor<T>& grad_buffer() {
        if (!has_grad) {
            grad = Tensor<T>(value.dims());
            has_grad = true;
        }
        return grad;
    }
};

// Handle to a node of the computation graph. Copies share the node.
template <typename T>
class Var {
   public:
    Var() = default;
    explicit Var(Tensor<T> value, bool requires_grad = false) : node_(std::make_shared<Node<T>>()) {
        node_->value = std::move(value);
        node_->requires_grad = requires_grad;
    }
    explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

    const Tensor<T>& value() const { return node_->value; }
    // Only meaningful on leaves: used by optimizers and checkpoint loading.
    Tensor<T>& mutable_value() { return node_->value; }
    const Shape& dims() const { return node_->value.dims(); }
    std::size_t size() const { return node_->value.size(); }
    bool requires_grad() const { return node_->requires_grad; }
    bool defined() const { return static_cast<bool>(node_); }

    // Zero tensor when no gradient has reached this node.
    Tensor<T> grad() const { return node_->has_grad ? node_->grad : Tensor<T>(dims()); }
    void zero_grad() {
        node_->grad = Tensor<T>();
        node_->has_grad = false;
    }

    const std::shared_ptr<Node<T>>& node() const { return node_; }

   private:
    std::shared_ptr<Node<T>> node_;
};

// While alive, operations on this thread record no graph (evaluation mode).
class NoGradGuard {
   public:
    NoGradGuard() : previous_(enabled_) { enabled_ = false; }
    ~NoGradGuard() { enabled_ = previous_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

    static bool grad_enabled() { return enabled_; }

   private:
    bool previous_;
    static thread_local bool enabled_;
};

template <typename T>
Var<T> constant(Tensor<T> value) {
    return Var<T>(std::move(value), false);
}

template <typename T>
Var<T> parameter(Tensor<T> value) {
    return Var<T>(std::move(value), true);
}

// Nodes that require grad, reachable from the root, in topological order (inputs first).
template <typename T>
struct ComputationRecord {
    std::vector<Node<T>*> order;
};

template <typename T>
ComputationRecord<T> record_graph(const Var<T>& root);

// Reverse-mode sweep from a scalar loss. Gradients accumulate into every reachable node.
template <typename T>
void backward(const ComputationRecord<T>& record, const Var<T>& loss);

template <typename T>
void backward(const Var<T>& loss);

// Clears the grads of `params`, runs backward, and returns one gradient per parameter.
// Parameters that the loss does not depend on get a zero gradient.
template <typename T>
std::vector<Tensor<T>> gradients(const Var<T>& loss, std::span<Var<T>> params);

// --- differentiable operations -------------------------------------------------------------

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b);
// weights * rows, with every output entry summed over the pooled rows in an order that
// does not depend on their arrangement: permuting the rows together with the weight
// columns leaves the result bitwise unchanged.
template <typename T>
Var<T> pool_rows(const Var<T>& weights, const Var<T>& rows);
template <typename T>
Var<T> transpose(const Var<T>& a);
template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> scale(const Var<T>& a, T s);
template <typename T>
Var<T> add_scalar(const Var<T>& a, T s);
// a: m x p, bias: p values (any rank), added to every row.
template <typename T>
Var<T> add_row_bias(const Var<T>& a, const Var<T>& bias);
template <typename T>
Var<T> relu(const Var<T>& a);
template <typename T>
Var<T> tanh_act(const Var<T>& a);
template <typename T>
Var<T> softmax_rows(const Var<T>& a);
template <typename T>
Var<T> l2_normalize(const Var<T>& v);
template <typename T>
Var<T> l2_normalize_rows(const Var<T>& a);
template <typename T>
Var<T> cosine(const Var<T>& u, const Var<T>& v);
template <typename T>
Var<T> frobenius_sq(const Var<T>& a);
template <typename T>
Var<T> sum(const Var<T>& a);
template <typename T>
Var<T> mean(const Var<T>& a);
template <typename T>
Var<T> reshape(const Var<T>& a, Shape dims);
// out.flat[i] = a.flat[indices[i]]; backward scatter-adds.
template <typename T>
Var<T> gather(const Var<T>& a, std::vector<std::size_t> indices, Shape dims);
template <typename T>
Var<T> row(const Var<T>& a, std::size_t i);
// Each input contributes one row (flattened); all inputs must have equal size.
template <typename T>
Var<T> stack_rows(std::span<const Var<T>> rows);
template <typename T>
Var<T> concat_cols(const Var<T>& a, const Var<T>& b);
// Inverted dropout: kept entries are scaled by 1/(1-p). p == 0 returns `a` unchanged.
template <typename T>
Var<T> dropout(const Var<T>& a, double p, Rng& rng);

// x * weight + bias, with x: m x in, weight: in x out.
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
    return add_row_bias(matmul(x, weight), bias);
}

inline constexpr double kNormEpsilon = 1e-12;

}  // namespace vse
