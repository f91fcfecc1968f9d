#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vse/autograd.hpp"

namespace vse {

// Paired encoder outputs for one batch; index n pairs images[n] with sentences[n].
template <typename T>
struct BatchEmbeddings {
    std::vector<Var<T>> images;
    std::vector<Var<T>> sentences;
    std::vector<Var<T>> image_weights;  // M_n, r x l
    std::vector<Var<T>> text_weights;   // Q_n, r x n

    std::size_t size() const { return images.size(); }
};

enum class DiversityReduction { mean, sum };

struct LossConfig {
    double margin = 0.2;
    double diversity_weight = 0.1;
    DiversityReduction reduction = DiversityReduction::mean;
};

// S[n][m] = cos(x_n, y_m).
template <typename T>
Var<T> similarity_matrix(std::span<const Var<T>> images, std::span<const Var<T>> sentences);

// Hardest off-diagonal entry per row (image anchors) and per column (sentence anchors).
// Ties go to the lowest index.
struct HardNegatives {
    std::vector<std::size_t> per_row;
    std::vector<std::size_t> per_col;
};

template <typename T>
HardNegatives hardest_negatives(const Tensor<T>& similarity);

// (1/N) sum_n [a - S_nn + max_{m!=n} S_nm]_+ + [a - S_nn + max_{m!=n} S_mn]_+
template <typename T>
Var<T> triplet_hard_negative_loss(const Var<T>& similarity, T margin);

// ||M M^T - I||_F^2 + ||Q Q^T - I||_F^2. `expected_heads` of 0 skips the head-count check.
template <typename T>
Var<T> diversity_loss(const Var<T>& image_weights, const Var<T>& text_weights, std::size_t expected_heads = 0);

template <typename T>
struct LossBreakdown {
    Var<T> total;
    double triplet = 0.0;
    double diversity = 0.0;  // reduced over the batch, before weighting
};

template <typename T>
LossBreakdown<T> total_loss(const BatchEmbeddings<T>& batch, const LossConfig& cfg);

}  // namespace vse
