#include "vse/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

namespace vse {

thread_local bool NoGradGuard::enabled_ = true;

namespace {

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
using BackwardFn = std::function<void(Node<T>&)>;

// Builds the result node. Inputs and the backward closure are kept only when some input
// requires grad, so evaluation-time graphs hold nothing but values.
template <typename T>
Var<T> make_result(Tensor<T> value, const char* op, std::initializer_list<Var<T>> inputs, BackwardFn<T> fn) {
    if (!value.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op);
    auto node = std::make_shared<Node<T>>();
    node->value = std::move(value);
    node->op = op;
    bool needs = false;
    if (NoGradGuard::grad_enabled())
        for (const auto& in : inputs) needs = needs || in.requires_grad();
    if (needs) {
        node->requires_grad = true;
        for (const auto& in : inputs) node->inputs.push_back(in.node());
        node->backward = std::move(fn);
    }
    return Var<T>(std::move(node));
}

template <typename T>
Var<T> make_result_n(Tensor<T> value, const char* op, std::span<const Var<T>> inputs, BackwardFn<T> fn) {
    if (!value.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op);
    auto node = std::make_shared<Node<T>>();
    node->value = std::move(value);
    node->op = op;
    bool needs = false;
    if (NoGradGuard::grad_enabled())
        for (const auto& in : inputs) needs = needs || in.requires_grad();
    if (needs) {
        node->requires_grad = true;
        for (const auto& in : inputs) node->inputs.push_back(in.node());
        node->backward = std::move(fn);
    }
    return Var<T>(std::move(node));
}

template <typename T>
void require_rank2(const Tensor<T>& t, const char* op, const char* which) {
    if (t.rank() != 2) {
        throw ShapeError(std::string(op) + ": " + which + " must be a matrix, got " + shape_str(t.dims()));
    }
}

template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.dims() != b.dims()) {
        throw ShapeError(std::string(op) + ": dims " + shape_str(a.dims()) + " and " + shape_str(b.dims()) +
                         " differ");
    }
}

// c (m x p) += a (m x k) * b (k x p), with optional transposes of the stored operands.
// Sum whose result does not depend on the order of `terms` (they are sorted first).
template <typename T>
T order_free_sum(std::vector<T>& terms) {
    std::sort(terms.begin(), terms.end());
    T total = 0;
    for (T t : terms) total += t;
    return total;
}

template <typename T>
void gemm_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t p, bool ta, bool tb) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t s = 0; s < k; ++s) {
            const T av = ta ? a[s * m + i] : a[i * k + s];
            if (av == T(0)) continue;
            T* crow = c + i * p;
            if (tb) {
                for (std::size_t j = 0; j < p; ++j) crow[j] += av * b[j * k + s];
            } else {
                const T* brow = b + s * p;
                for (std::size_t j = 0; j < p; ++j) crow[j] += av * brow[j];
            }
        }
    }
}

template <typename T>
T norm2(std::span<const T> v) {
    T s = 0;
    for (T x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

template <typename T>
ComputationRecord<T> record_graph(const Var<T>& root) {
    ComputationRecord<T> rec;
    if (!root.requires_grad()) return rec;
    std::unordered_set<const Node<T>*> visited;
    // Iterative post-order DFS.
    std::vector<std::pair<Node<T>*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node<T>* child = node->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
        } else {
            rec.order.push_back(node);
            stack.pop_back();
        }
    }
    return rec;
}

template <typename T>
void backward(const ComputationRecord<T>& record, const Var<T>& loss) {
    if (loss.size() != 1) throw ContractError("backward requires a scalar loss, got dims " + shape_str(loss.dims()));
    if (record.order.empty()) return;
    if (record.order.back() != loss.node().get()) throw ContractError("computation record does not end at the loss");
    loss.node()->grad_buffer()[0] += T(1);
    for (auto it = record.order.rbegin(); it != record.order.rend(); ++it) {
        Node<T>* node = *it;
        if (node->backward && node->has_grad) node->backward(*node);
    }
}

template <typename T>
void backward(const Var<T>& loss) {
    backward(record_graph(loss), loss);
}

template <typename T>
std::vector<Tensor<T>> gradients(const Var<T>& loss, std::span<Var<T>> params) {
    for (auto& p : params) p.zero_grad();
    backward(loss);
    std::vector<Tensor<T>> out;
    out.reserve(params.size());
    for (const auto& p : params) out.push_back(p.grad());
    return out;
}

// --- ops -----------------------------------------------------------------------------------

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
    const auto& av = a.value();
    const auto& bv = b.value();
    if (av.rank() > 2 || bv.rank() > 2 || av.rank() == 0 || bv.rank() == 0) {
        throw ShapeError("matmul: operands must be matrices, got " + shape_str(av.dims()) + " and " +
                         shape_str(bv.dims()));
    }
    const std::size_t m = av.rows(), k = av.cols(), p = bv.cols();
    if (bv.rows() != k) {
        throw ShapeError("matmul: inner dims disagree, left has " + std::to_string(k) + " columns, right has " +
                         std::to_string(bv.rows()) + " rows");
    }
    Tensor<T> out(Shape{m, p});
    gemm_acc(av.values().data(), bv.values().data(), out.values().data(), m, k, p, false, false);
    return make_result<T>(std::move(out), "matmul", {a, b}, [m, k, p](Node<T>& self) {
        auto& A = *self.inputs[0];
        auto& B = *self.inputs[1];
        const T* g = self.grad.values().data();
        if (A.requires_grad) gemm_acc(g, B.value.values().data(), A.grad_buffer().values().data(), m, p, k, false, true);
        if (B.requires_grad) gemm_acc(A.value.values().data(), g, B.grad_buffer().values().data(), k, m, p, true, false);
    });
}

template <typename T>
Var<T> pool_rows(const Var<T>& weights, const Var<T>& rows) {
    const auto& wv = weights.value();
    const auto& rv = rows.value();
    if (wv.rank() != 2 || rv.rank() != 2 || wv.cols() != rv.rows()) {
        throw ShapeError("pool_rows: weights " + shape_str(wv.dims()) + " do not match rows " + shape_str(rv.dims()));
    }
    const std::size_t m = wv.rows(), k = wv.cols(), p = rv.cols();
    Tensor<T> out(Shape{m, p});
    std::vector<T> terms(k);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t c = 0; c < p; ++c) {
            for (std::size_t j = 0; j < k; ++j) terms[j] = wv(i, j) * rv(j, c);
            out(i, c) = order_free_sum(terms);
        }
    }
    return make_result<T>(std::move(out), "pool_rows", {weights, rows}, [m, k, p](Node<T>& self) {
        auto& A = *self.inputs[0];
        auto& B = *self.inputs[1];
        const T* g = self.grad.values().data();
        if (A.requires_grad) gemm_acc(g, B.value.values().data(), A.grad_buffer().values().data(), m, p, k, false, true);
        if (B.requires_grad) gemm_acc(A.value.values().data(), g, B.grad_buffer().values().data(), k, m, p, true, false);
    });
}

template <typename T>
Var<T> transpose(const Var<T>& a) {
    const auto& av = a.value();
    if (av.rank() > 2) throw ShapeError("transpose: expected a matrix, got " + shape_str(av.dims()));
    const std::size_t m = av.rows(), n = av.cols();
    Tensor<T> out(Shape{n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out(j, i) = av(i, j);
    return make_result<T>(std::move(out), "transpose", {a}, [m, n](Node<T>& self) {
        auto& g = self.grad;
        auto& ga = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
    });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    require_same(a.value(), b.value(), "add");
    Tensor<T> out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
    return make_result<T>(std::move(out), "add", {a, b}, [](Node<T>& self) {
        for (auto& in : self.inputs) {
            if (!in->requires_grad) continue;
            auto& g = in->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    require_same(a.value(), b.value(), "sub");
    Tensor<T> out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
    return make_result<T>(std::move(out), "sub", {a, b}, [](Node<T>& self) {
        if (self.inputs[0]->requires_grad) {
            auto& g = self.inputs[0]->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (self.inputs[1]->requires_grad) {
            auto& g = self.inputs[1]->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    require_same(a.value(), b.value(), "mul");
    Tensor<T> out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    return make_result<T>(std::move(out), "mul", {a, b}, [](Node<T>& self) {
        auto& A = *self.inputs[0];
        auto& B = *self.inputs[1];
        if (A.requires_grad) {
            auto& g = A.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * B.value[i];
        }
        if (B.requires_grad) {
            auto& g = B.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * A.value[i];
        }
    });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
    Tensor<T> out = a.value();
    for (auto& v : out.values()) v *= s;
    return make_result<T>(std::move(out), "scale", {a}, [s](Node<T>& self) {
        auto& g = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
    });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T s) {
    Tensor<T> out = a.value();
    for (auto& v : out.values()) v += s;
    return make_result<T>(std::move(out), "add_scalar", {a}, [](Node<T>& self) {
        auto& g = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

template <typename T>
Var<T> add_row_bias(const Var<T>& a, const Var<T>& bias) {
    const auto& av = a.value();
    const std::size_t m = av.rows(), p = av.cols();
    if (bias.size() != p) {
        throw ShapeError("add_row_bias: bias has " + std::to_string(bias.size()) + " values, rows have " +
                         std::to_string(p));
    }
    Tensor<T> out = av;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < p; ++j) out[i * p + j] += bias.value()[j];
    return make_result<T>(std::move(out), "add_row_bias", {a, bias}, [m, p](Node<T>& self) {
        if (self.inputs[0]->requires_grad) {
            auto& g = self.inputs[0]->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (self.inputs[1]->requires_grad) {
            auto& g = self.inputs[1]->grad_buffer();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < p; ++j) g[j] += self.grad[i * p + j];
        }
    });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
    Tensor<T> out = a.value();
    for (auto& v : out.values()) v = v > T(0) ? v : T(0);
    return make_result<T>(std::move(out), "relu", {a}, [](Node<T>& self) {
        auto& in = *self.inputs[0];
        auto& g = in.grad_buffer();
        // Subgradient at exactly zero is zero.
        for (std::size_t i = 0; i < g.size(); ++i)
            if (in.value[i] > T(0)) g[i] += self.grad[i];
    });
}

template <typename T>
Var<T> tanh_act(const Var<T>& a) {
    Tensor<T> out = a.value();
    for (auto& v : out.values()) v = std::tanh(v);
    return make_result<T>(std::move(out), "tanh", {a}, [](Node<T>& self) {
        auto& g = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const T y = self.value[i];
            g[i] += self.grad[i] * (T(1) - y * y);
        }
    });
}

template <typename T>
Var<T> softmax_rows(const Var<T>& a) {
    const auto& av = a.value();
    const std::size_t m = av.rows(), n = av.cols();
    Tensor<T> out(av.dims());
    for (std::size_t i = 0; i < m; ++i) {
        const T* x = &av[i * n];
        T* y = &out[i * n];
        const T mx = *std::max_element(x, x + n);
        for (std::size_t j = 0; j < n; ++j) y[j] = std::exp(x[j] - mx);
        std::vector<T> terms(y, y + n);
        const T total = order_free_sum(terms);
        for (std::size_t j = 0; j < n; ++j) y[j] /= total;
    }
    return make_result<T>(std::move(out), "softmax_rows", {a}, [m, n](Node<T>& self) {
        auto& g = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < m; ++i) {
            const T* y = &self.value[i * n];
            const T* gy = &self.grad[i * n];
            T dot = 0;
            for (std::size_t j = 0; j < n; ++j) dot += y[j] * gy[j];
            for (std::size_t j = 0; j < n; ++j) g[i * n + j] += y[j] * (gy[j] - dot);
        }
    });
}

template <typename T>
Var<T> l2_normalize(const Var<T>& v) {
    const T norm = norm2<T>(v.value().values());
    if (!(norm > T(kNormEpsilon))) throw DegenerateVectorError("l2_normalize: vector norm is zero");
    Tensor<T> out = v.value();
    for (auto& x : out.values()) x /= norm;
    return make_result<T>(std::move(out), "l2_normalize", {v}, [norm](Node<T>& self) {
        const auto& y = self.value;
        T dot = 0;
        for (std::size_t i = 0; i < y.size(); ++i) dot += y[i] * self.grad[i];
        auto& g = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < y.size(); ++i) g[i] += (self.grad[i] - y[i] * dot) / norm;
    });
}

template <typename T>
Var<T> l2_normalize_rows(const Var<T>& a) {
    const auto& av = a.value();
    const std::size_t m = av.rows(), n = av.cols();
    std::vector<T> norms(m);
    Tensor<T> out = av;
    for (std::size_t i = 0; i < m; ++i) {
        norms[i] = norm2<T>(av.values().subspan(i * n, n));
        if (!(norms[i] > T(kNormEpsilon))) {
            throw DegenerateVectorError("l2_normalize_rows: row " + std::to_string(i) + " has zero norm");
        }
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= norms[i];
    }
    return make_result<T>(std::move(out), "l2_normalize_rows", {a}, [m, n, norms](Node<T>& self) {
        auto& g = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < m; ++i) {
            const T* y = &self.value[i * n];
            const T* gy = &self.grad[i * n];
            T dot = 0;
            for (std::size_t j = 0; j < n; ++j) dot += y[j] * gy[j];
            for (std::size_t j = 0; j < n; ++j) g[i * n + j] += (gy[j] - y[j] * dot) / norms[i];
        }
    });
}

template <typename T>
Var<T> cosine(const Var<T>& u, const Var<T>& v) {
    if (u.size() != v.size()) {
        throw ShapeError("cosine: vectors have " + std::to_string(u.size()) + " and " + std::to_string(v.size()) +
                         " entries");
    }
    const auto& uv = u.value();
    const auto& vv = v.value();
    const T nu = norm2<T>(uv.values()), nv = norm2<T>(vv.values());
    if (!(nu > T(kNormEpsilon)) || !(nv > T(kNormEpsilon))) throw DegenerateVectorError("cosine: zero vector");
    T dot = 0;
    for (std::size_t i = 0; i < uv.size(); ++i) dot += uv[i] * vv[i];
    const T c = std::clamp(dot / (nu * nv), T(-1), T(1));
    return make_result<T>(Tensor<T>::scalar(c), "cosine", {u, v}, [nu, nv, c](Node<T>& self) {
        const T gy = self.grad[0];
        auto& U = *self.inputs[0];
        auto& V = *self.inputs[1];
        if (U.requires_grad) {
            auto& g = U.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i)
                g[i] += gy * (V.value[i] / (nu * nv) - c * U.value[i] / (nu * nu));
        }
        if (V.requires_grad) {
            auto& g = V.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i)
                g[i] += gy * (U.value[i] / (nu * nv) - c * V.value[i] / (nv * nv));
        }
    });
}

template <typename T>
Var<T> frobenius_sq(const Var<T>& a) {
    T s = 0;
    for (T x : a.value().values()) s += x * x;
    return make_result<T>(Tensor<T>::scalar(s), "frobenius_sq", {a}, [](Node<T>& self) {
        auto& in = *self.inputs[0];
        auto& g = in.grad_buffer();
        const T gy = self.grad[0];
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += T(2) * in.value[i] * gy;
    });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
    T s = 0;
    for (T x : a.value().values()) s += x;
    return make_result<T>(Tensor<T>::scalar(s), "sum", {a}, [](Node<T>& self) {
        auto& g = self.inputs[0]->grad_buffer();
        for (auto& x : g.values()) x += self.grad[0];
    });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
    return scale(sum(a), T(1) / static_cast<T>(a.size()));
}

template <typename T>
Var<T> reshape(const Var<T>& a, Shape dims) {
    Tensor<T> out = a.value().reshaped(std::move(dims));
    return make_result<T>(std::move(out), "reshape", {a}, [](Node<T>& self) {
        auto& g = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

template <typename T>
Var<T> gather(const Var<T>& a, std::vector<std::size_t> indices, Shape dims) {
    if (shape_size(dims) != indices.size()) {
        throw ShapeError("gather: " + std::to_string(indices.size()) + " indices for output dims " + shape_str(dims));
    }
    const auto& av = a.value();
    Tensor<T> out(std::move(dims));
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= av.size()) {
            throw ShapeError("gather: index " + std::to_string(indices[i]) + " outside tensor of size " +
                             std::to_string(av.size()));
        }
        out[i] = av[indices[i]];
    }
    return make_result<T>(std::move(out), "gather", {a}, [idx = std::move(indices)](Node<T>& self) {
        auto& g = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < idx.size(); ++i) g[idx[i]] += self.grad[i];
    });
}

template <typename T>
Var<T> row(const Var<T>& a, std::size_t i) {
    const std::size_t m = a.value().rows(), n = a.value().cols();
    if (i >= m) throw ShapeError("row: index " + std::to_string(i) + " outside " + std::to_string(m) + " rows");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), i * n);
    return gather(a, std::move(idx), Shape{1, n});
}

template <typename T>
Var<T> stack_rows(std::span<const Var<T>> rows) {
    if (rows.empty()) throw ShapeError("stack_rows: no rows");
    const std::size_t n = rows[0].size();
    Tensor<T> out(Shape{rows.size(), n});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != n) {
            throw ShapeError("stack_rows: row " + std::to_string(i) + " has " + std::to_string(rows[i].size()) +
                             " entries, expected " + std::to_string(n));
        }
        std::copy(rows[i].value().values().begin(), rows[i].value().values().end(), &out[i * n]);
    }
    return make_result_n<T>(std::move(out), "stack_rows", rows, [n](Node<T>& self) {
        for (std::size_t i = 0; i < self.inputs.size(); ++i) {
            auto& in = *self.inputs[i];
            if (!in.requires_grad) continue;
            auto& g = in.grad_buffer();
            for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
        }
    });
}

template <typename T>
Var<T> concat_cols(const Var<T>& a, const Var<T>& b) {
    const auto& av = a.value();
    const auto& bv = b.value();
    const std::size_t m = av.rows(), p = av.cols(), q = bv.cols();
    if (bv.rows() != m) {
        throw ShapeError("concat_cols: row counts " + std::to_string(m) + " and " + std::to_string(bv.rows()) +
                         " differ");
    }
    Tensor<T> out(Shape{m, p + q});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < p; ++j) out(i, j) = av[i * p + j];
        for (std::size_t j = 0; j < q; ++j) out(i, p + j) = bv[i * q + j];
    }
    return make_result<T>(std::move(out), "concat_cols", {a, b}, [m, p, q](Node<T>& self) {
        if (self.inputs[0]->requires_grad) {
            auto& g = self.inputs[0]->grad_buffer();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < p; ++j) g[i * p + j] += self.grad[i * (p + q) + j];
        }
        if (self.inputs[1]->requires_grad) {
            auto& g = self.inputs[1]->grad_buffer();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < q; ++j) g[i * q + j] += self.grad[i * (p + q) + p + j];
        }
    });
}

template <typename T>
Var<T> dropout(const Var<T>& a, double p, Rng& rng) {
    if (p <= 0.0) return a;
    if (p >= 1.0) throw ConfigError("dropout probability must be below 1, got " + std::to_string(p));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const T keep_scale = T(1.0 / (1.0 - p));
    Tensor<T> mask(a.dims());
    for (auto& m : mask.values()) m = unif(rng) < p ? T(0) : keep_scale;
    return mul(a, constant(std::move(mask)));
}

#define VSE_INSTANTIATE_AUTOGRAD(T)                                                      \
    template ComputationRecord<T> record_graph(const Var<T>&);                           \
    template void backward(const ComputationRecord<T>&, const Var<T>&);                  \
    template void backward(const Var<T>&);                                               \
    template std::vector<Tensor<T>> gradients(const Var<T>&, std::span<Var<T>>);         \
    template Var<T> matmul(const Var<T>&, const Var<T>&);                                \
    template Var<T> pool_rows(const Var<T>&, const Var<T>&);                             \
    template Var<T> transpose(const Var<T>&);                                            \
    template Var<T> add(const Var<T>&, const Var<T>&);                                   \
    template Var<T> sub(const Var<T>&, const Var<T>&);                                   \
    template Var<T> mul(const Var<T>&, const Var<T>&);                                   \
    template Var<T> scale(const Var<T>&, T);                                             \
    template Var<T> add_scalar(const Var<T>&, T);                                        \
    template Var<T> add_row_bias(const Var<T>&, const Var<T>&);                          \
    template Var<T> relu(const Var<T>&);                                                 \
    template Var<T> tanh_act(const Var<T>&);                                             \
    template Var<T> softmax_rows(const Var<T>&);                                         \
    template Var<T> l2_normalize(const Var<T>&);                                         \
    template Var<T> l2_normalize_rows(const Var<T>&);                                    \
    template Var<T> cosine(const Var<T>&, const Var<T>&);                                \
    template Var<T> frobenius_sq(const Var<T>&);                                         \
    template Var<T> sum(const Var<T>&);                                                  \
    template Var<T> mean(const Var<T>&);                                                 \
    template Var<T> reshape(const Var<T>&, Shape);                                       \
    template Var<T> gather(const Var<T>&, std::vector<std::size_t>, Shape);              \
    template Var<T> row(const Var<T>&, std::size_t);                                     \
    template Var<T> stack_rows(std::span<const Var<T>>);                                 \
    template Var<T> concat_cols(const Var<T>&, const Var<T>&);                           \
    template Var<T> dropout(const Var<T>&, double, Rng&);

VSE_INSTANTIATE_AUTOGRAD(float)
VSE_INSTANTIATE_AUTOGRAD(double)

}  // namespace vse
