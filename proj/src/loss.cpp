#include "vse/loss.hpp"

#include <string>

namespace vse {

template <typename T>
Var<T> similarity_matrix(std::span<const Var<T>> images, std::span<const Var<T>> sentences) {
    if (images.empty() || sentences.empty()) throw ContractError("similarity_matrix: empty batch");
    auto x = l2_normalize_rows(stack_rows(images));
    auto y = l2_normalize_rows(stack_rows(sentences));
    return matmul(x, transpose(y));
}

template <typename T>
HardNegatives hardest_negatives(const Tensor<T>& s) {
    const std::size_t n = s.rows();
    if (s.rank() != 2 || s.cols() != n) throw ShapeError("similarity must be square, got " + shape_str(s.dims()));
    if (n < 2) throw ContractError("hard negatives need a batch of at least 2, got " + std::to_string(n));
    HardNegatives out{std::vector<std::size_t>(n), std::vector<std::size_t>(n)};
    for (std::size_t a = 0; a < n; ++a) {
        std::size_t best_r = a == 0 ? 1 : 0, best_c = best_r;
        for (std::size_t m = 0; m < n; ++m) {
            if (m == a) continue;
            if (s(a, m) > s(a, best_r)) best_r = m;
            if (s(m, a) > s(best_c, a)) best_c = m;
        }
        out.per_row[a] = best_r;
        out.per_col[a] = best_c;
    }
    return out;
}

template <typename T>
Var<T> triplet_hard_negative_loss(const Var<T>& similarity, T margin) {
    const auto neg = hardest_negatives(similarity.value());
    const std::size_t n = neg.per_row.size();
    std::vector<std::size_t> diag(n), row_neg(n), col_neg(n);
    for (std::size_t a = 0; a < n; ++a) {
        diag[a] = a * n + a;
        row_neg[a] = a * n + neg.per_row[a];
        col_neg[a] = neg.per_col[a] * n + a;
    }
    auto positive = gather(similarity, diag, Shape{n});
    auto image_term = relu(add_scalar(sub(gather(similarity, row_neg, Shape{n}), positive), margin));
    auto text_term = relu(add_scalar(sub(gather(similarity, col_neg, Shape{n}), positive), margin));
    return scale(add(sum(image_term), sum(text_term)), T(1) / static_cast<T>(n));
}

template <typename T>
Var<T> diversity_loss(const Var<T>& image_weights, const Var<T>& text_weights, std::size_t expected_heads) {
    const std::size_t r = image_weights.value().rows();
    if (text_weights.value().rows() != r) {
        throw ShapeError("diversity_loss: image attention has " + std::to_string(r) + " heads, text attention has " +
                         std::to_string(text_weights.value().rows()));
    }
    if (expected_heads != 0 && r != expected_heads) {
        throw ShapeError("diversity_loss: attention has " + std::to_string(r) + " heads, configured " +
                         std::to_string(expected_heads));
    }
    const auto eye = constant(Tensor<T>::identity(r));
    auto term = [&](const Var<T>& w) { return frobenius_sq(sub(matmul(w, transpose(w)), eye)); };
    return add(term(image_weights), term(text_weights));
}

template <typename T>
LossBreakdown<T> total_loss(const BatchEmbeddings<T>& batch, const LossConfig& cfg) {
    const std::size_t n = batch.size();
    if (batch.sentences.size() != n || batch.image_weights.size() != n || batch.text_weights.size() != n) {
        throw ContractError("total_loss: batch components have different sizes");
    }
    if (n < 2) throw ContractError("total_loss: training batches need at least 2 pairs, got " + std::to_string(n));
    auto sim = similarity_matrix<T>(batch.images, batch.sentences);
    auto triplet = triplet_hard_negative_loss(sim, static_cast<T>(cfg.margin));

    std::vector<Var<T>> per_item;
    per_item.reserve(n);
    for (std::size_t i = 0; i < n; ++i) per_item.push_back(diversity_loss(batch.image_weights[i], batch.text_weights[i]));
    auto diversity = sum(stack_rows(std::span<const Var<T>>(per_item)));
    if (cfg.reduction == DiversityReduction::mean) diversity = scale(diversity, T(1) / static_cast<T>(n));

    LossBreakdown<T> out;
    out.triplet = triplet.value().item();
    out.diversity = diversity.value().item();
    out.total = cfg.diversity_weight == 0.0 ? triplet
                                            : add(triplet, scale(diversity, static_cast<T>(cfg.diversity_weight)));
    return out;
}

#define VSE_INSTANTIATE_LOSS(T)                                                            \
    template Var<T> similarity_matrix(std::span<const Var<T>>, std::span<const Var<T>>);   \
    template HardNegatives hardest_negatives(const Tensor<T>&);                            \
    template Var<T> triplet_hard_negative_loss(const Var<T>&, T);                          \
    template Var<T> diversity_loss(const Var<T>&, const Var<T>&, std::size_t);             \
    template LossBreakdown<T> total_loss(const BatchEmbeddings<T>&, const LossConfig&);

VSE_INSTANTIATE_LOSS(float)
VSE_INSTANTIATE_LOSS(double)

}  // namespace vse
