#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "test_util.hpp"
#include "vse/errors.hpp"
#include "vse/gradcheck.hpp"
#include "vse/loss.hpp"

using namespace vse;
using vse::testing::random_tensor;

namespace {

Var<double> mat(std::size_t r, std::size_t c, std::vector<double> v) {
    return constant(Tensor<double>::matrix(r, c, std::move(v)));
}

// Enumerates every (anchor, negative) triplet and keeps the largest violation per anchor.
double brute_force_triplet(const Tensor<double>& s, double margin) {
    const std::size_t n = s.rows();
    double total = 0;
    for (std::size_t a = 0; a < n; ++a) {
        double worst_row = -INFINITY, worst_col = -INFINITY;
        for (std::size_t m = 0; m < n; ++m) {
            if (m == a) continue;
            worst_row = std::max(worst_row, margin - s(a, a) + s(a, m));
            worst_col = std::max(worst_col, margin - s(a, a) + s(m, a));
        }
        total += std::max(0.0, worst_row) + std::max(0.0, worst_col);
    }
    return total / double(n);
}

BatchEmbeddings<double> random_batch(std::size_t n, std::size_t d, std::size_t r, std::size_t l, std::size_t words,
                                     Rng& rng) {
    BatchEmbeddings<double> b;
    for (std::size_t i = 0; i < n; ++i) {
        b.images.push_back(l2_normalize(constant(random_tensor({1, d}, rng))));
        b.sentences.push_back(l2_normalize(constant(random_tensor({1, d}, rng))));
        b.image_weights.push_back(softmax_rows(constant(random_tensor({r, l}, rng, -3, 3))));
        b.text_weights.push_back(softmax_rows(constant(random_tensor({r, words}, rng, -3, 3))));
    }
    return b;
}

}  // namespace

TEST(Similarity, IdenticalAndOrthonormal) {
    std::vector<Var<double>> same{mat(1, 2, {0.6, 0.8}), mat(1, 2, {0.6, 0.8})};
    const auto ones = similarity_matrix<double>(same, same).value();
    for (double v : ones.values()) EXPECT_NEAR(v, 1.0, 1e-15);

    std::vector<Var<double>> basis{mat(1, 3, {1, 0, 0}), mat(1, 3, {0, 1, 0}), mat(1, 3, {0, 0, 1})};
    EXPECT_EQ(similarity_matrix<double>(basis, basis).value(), Tensor<double>::identity(3));
}

TEST(Similarity, MatchesPairwiseCosine) {
    Rng rng(1);
    std::vector<Var<double>> x, y;
    for (int i = 0; i < 5; ++i) x.push_back(constant(random_tensor({1, 4}, rng)));
    for (int i = 0; i < 5; ++i) y.push_back(constant(random_tensor({1, 4}, rng)));
    const auto s = similarity_matrix<double>(x, y).value();
    for (std::size_t n = 0; n < 5; ++n)
        for (std::size_t m = 0; m < 5; ++m) EXPECT_NEAR(s(n, m), cosine(x[n], y[m]).value().item(), 1e-12);
}

TEST(Triplet, WorkedExamples) {
    EXPECT_EQ(triplet_hard_negative_loss(mat(2, 2, {1, -1, -1, 1}), 0.2).value().item(), 0.0);
    // Row anchors: [0.2-0.9+0.8]+ = 0.1, [0.2-0.95+0.7]+ = 0; column anchors: [0.2-0.9+0.7]+ = 0,
    // [0.2-0.95+0.8]+ = 0.05. (0.1 + 0.05) / 2 = 0.075.
    const double v = triplet_hard_negative_loss(mat(2, 2, {0.9, 0.8, 0.7, 0.95}), 0.2).value().item();
    EXPECT_NEAR(v, 0.075, 1e-15);
    EXPECT_NEAR(brute_force_triplet(Tensor<double>::matrix(2, 2, {0.9, 0.8, 0.7, 0.95}), 0.2), 0.075, 1e-15);
}

TEST(Triplet, ShiftInvariantAndNeedsTwoItems) {
    Rng rng(2);
    const auto s = random_tensor({6, 6}, rng);
    Tensor<double> shifted = s;
    for (auto& v : shifted.values()) v += 0.37;
    EXPECT_NEAR(triplet_hard_negative_loss(constant(s), 0.2).value().item(),
                triplet_hard_negative_loss(constant(shifted), 0.2).value().item(), 1e-12);
    EXPECT_THROW(triplet_hard_negative_loss(mat(1, 1, {0.5}), 0.2), ContractError);
    EXPECT_THROW(triplet_hard_negative_loss(mat(2, 3, {0, 0, 0, 0, 0, 0}), 0.2), ShapeError);
}

TEST(Triplet, MatchesBruteForceOnRandomMatrices) {
    Rng rng(3);
    std::uniform_int_distribution<std::size_t> size(2, 16);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = size(rng);
        const auto s = random_tensor({n, n}, rng);
        const double got = triplet_hard_negative_loss(constant(s), 0.2).value().item();
        ASSERT_NEAR(got, brute_force_triplet(s, 0.2), 1e-10) << "N = " << n;
        ASSERT_GE(got, 0.0);
    }
}

TEST(Triplet, InvariantUnderJointReindexing) {
    Rng rng(4);
    const std::size_t n = 7;
    const auto s = random_tensor({n, n}, rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Tensor<double> p(Shape{n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) p(i, j) = s(perm[i], perm[j]);
    EXPECT_NEAR(triplet_hard_negative_loss(constant(s), 0.2).value().item(),
                triplet_hard_negative_loss(constant(p), 0.2).value().item(), 1e-12);
}

TEST(HardNegatives, BruteForceArgmaxWithLowestIndexTies) {
    Rng rng(5);
    std::uniform_int_distribution<int> level(0, 3);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 6;
        // Few distinct levels so ties are common.
        Tensor<double> s(Shape{n, n});
        for (auto& v : s.values()) v = 0.25 * level(rng);
        const auto hn = hardest_negatives(s);
        for (std::size_t a = 0; a < n; ++a) {
            std::size_t best_r = n, best_c = n;
            for (std::size_t m = 0; m < n; ++m) {
                if (m == a) continue;
                if (best_r == n || s(a, m) > s(a, best_r)) best_r = m;
                if (best_c == n || s(m, a) > s(best_c, a)) best_c = m;
            }
            ASSERT_EQ(hn.per_row[a], best_r);
            ASSERT_EQ(hn.per_col[a], best_c);
        }
    }
}

TEST(Diversity, HandValues) {
    auto onehots = mat(2, 3, {1, 0, 0, 0, 0, 1});
    EXPECT_NEAR(diversity_loss(onehots, onehots).value().item(), 0.0, 1e-12);

    auto uniform = mat(2, 2, {0.5, 0.5, 0.5, 0.5});
    auto q = mat(2, 2, {1, 0, 0, 1});
    EXPECT_NEAR(diversity_loss(uniform, q).value().item(), 1.0, 1e-12);

    auto m1 = mat(1, 4, {0.25, 0.25, 0.25, 0.25});
    auto q1 = mat(1, 3, {0, 1, 0});
    EXPECT_NEAR(diversity_loss(m1, q1).value().item(), 0.5625, 1e-12);
}

TEST(Diversity, HeadCountMismatch) {
    auto m = mat(2, 2, {1, 0, 0, 1});
    auto q = mat(1, 2, {1, 0});
    EXPECT_THROW(diversity_loss(m, q), ShapeError);
    EXPECT_THROW(diversity_loss(m, m, 3), ShapeError);
}

TEST(Diversity, NonNegativeAndDiagonalBounds) {
    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        auto m = softmax_rows(constant(random_tensor({3, 5}, rng, -4, 4)));
        auto q = softmax_rows(constant(random_tensor({3, 4}, rng, -4, 4)));
        ASSERT_GE(diversity_loss(m, q).value().item(), 0.0);
        const auto mmt = matmul(m, transpose(m)).value();
        for (std::size_t i = 0; i < 3; ++i) {
            ASSERT_GE(mmt(i, i), 1.0 / 5.0 - 1e-12);
            ASSERT_LE(mmt(i, i), 1.0 + 1e-12);
        }
    }
}

TEST(TotalLoss, LambdaZeroAndComponents) {
    Rng rng(7);
    const auto batch = random_batch(5, 6, 3, 4, 5, rng);
    LossConfig no_div{0.2, 0.0, DiversityReduction::mean};
    const auto t0 = total_loss(batch, no_div);
    const auto s = similarity_matrix<double>(batch.images, batch.sentences);
    const double triplet = triplet_hard_negative_loss(s, 0.2).value().item();
    EXPECT_NEAR(t0.total.value().item(), triplet, 1e-15);

    LossConfig cfg;
    double div = 0;
    for (std::size_t i = 0; i < 5; ++i)
        div += diversity_loss(batch.image_weights[i], batch.text_weights[i]).value().item();
    const auto t = total_loss(batch, cfg);
    EXPECT_NEAR(t.total.value().item(), triplet + 0.1 * div / 5.0, 1e-12);
    EXPECT_NEAR(t.triplet, triplet, 1e-12);
    EXPECT_NEAR(t.diversity, div / 5.0, 1e-12);

    cfg.reduction = DiversityReduction::sum;
    EXPECT_NEAR(total_loss(batch, cfg).total.value().item(), triplet + 0.1 * div, 1e-12);
}

TEST(TotalLoss, PerfectBatchIsZero) {
    BatchEmbeddings<double> b;
    for (std::size_t i = 0; i < 3; ++i) {
        std::vector<double> e(3, 0.0);
        e[i] = 1.0;
        b.images.push_back(mat(1, 3, e));
        b.sentences.push_back(mat(1, 3, e));
        b.image_weights.push_back(mat(2, 2, {1, 0, 0, 1}));
        b.text_weights.push_back(mat(2, 3, {0, 1, 0, 0, 0, 1}));
    }
    EXPECT_EQ(total_loss(b, LossConfig{}).total.value().item(), 0.0);
}

TEST(TotalLoss, RejectsSingletonBatch) {
    Rng rng(8);
    const auto batch = random_batch(1, 4, 2, 3, 3, rng);
    EXPECT_THROW(total_loss(batch, LossConfig{}), ContractError);
}

TEST(TotalLoss, GradientCheck) {
    Rng rng(9);
    const std::size_t n = 4, d = 5, r = 2, l = 6, w = 4;
    std::vector<Tensor<double>> point;
    for (std::size_t i = 0; i < n; ++i) {
        point.push_back(random_tensor({1, d}, rng));
        point.push_back(random_tensor({1, d}, rng));
        point.push_back(random_tensor({r, l}, rng));
        point.push_back(random_tensor({r, w}, rng));
    }
    ScalarFunction<double> f = [&](std::span<Var<double>> in) {
        BatchEmbeddings<double> b;
        for (std::size_t i = 0; i < n; ++i) {
            b.images.push_back(l2_normalize(in[4 * i]));
            b.sentences.push_back(l2_normalize(in[4 * i + 1]));
            b.image_weights.push_back(softmax_rows(in[4 * i + 2]));
            b.text_weights.push_back(softmax_rows(in[4 * i + 3]));
        }
        return total_loss(b, LossConfig{0.8, 0.1, DiversityReduction::mean}).total;
    };
    EXPECT_LT(grad_check<double>(f, point, 1e-5).max_rel_error, 1e-4);
}
