#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "test_util.hpp"
#include "vse/attention.hpp"
#include "vse/errors.hpp"
#include "vse/gradcheck.hpp"

using namespace vse;
using vse::testing::random_tensor;

namespace {

AttentionParams<double> random_attention(std::size_t d, std::size_t da, std::size_t r, Activation act, Rng& rng) {
    return {constant(random_tensor({da, d}, rng)), constant(random_tensor({r, da}, rng)), act, 0.0};
}

// softmax(W_a act(W_b V^T)) with explicit loops.
Tensor<double> attention_oracle(const Tensor<double>& v, const AttentionParams<double>& p) {
    const auto& wb = p.hidden_weight.value();
    const auto& wa = p.head_weight.value();
    const std::size_t l = v.rows(), d = v.cols(), da = wb.rows(), r = wa.rows();
    std::vector<double> hidden(da * l);
    for (std::size_t a = 0; a < da; ++a)
        for (std::size_t j = 0; j < l; ++j) {
            double s = 0;
            for (std::size_t k = 0; k < d; ++k) s += wb(a, k) * v(j, k);
            hidden[a * l + j] = p.activation == Activation::relu ? std::max(0.0, s) : std::tanh(s);
        }
    Tensor<double> m(Shape{r, l});
    for (std::size_t i = 0; i < r; ++i) {
        std::vector<double> logits(l);
        for (std::size_t j = 0; j < l; ++j)
            for (std::size_t a = 0; a < da; ++a) logits[j] += wa(i, a) * hidden[a * l + j];
        double z = 0;
        for (double x : logits) z += std::exp(x);
        for (std::size_t j = 0; j < l; ++j) m(i, j) = std::exp(logits[j]) / z;
    }
    return m;
}

}  // namespace

TEST(AttentionWeights, ZeroHeadWeightsGiveUniformRows) {
    Rng rng(1);
    auto p = random_attention(6, 4, 3, Activation::relu, rng);
    p.head_weight.mutable_value().fill(0.0);
    const auto m = attention_weights(constant(random_tensor({5, 6}, rng)), p).value();
    for (double v : m.values()) EXPECT_NEAR(v, 0.2, 1e-15);
}

TEST(AttentionWeights, SingleCellIsAllOnes) {
    Rng rng(2);
    auto p = random_attention(6, 4, 3, Activation::tanh, rng);
    const auto m = attention_weights(constant(random_tensor({1, 6}, rng)), p).value();
    EXPECT_EQ(m.dims(), (Shape{3, 1}));
    for (double v : m.values()) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(AttentionWeights, MatchesLoopOracle) {
    Rng rng(3);
    for (auto act : {Activation::relu, Activation::tanh}) {
        auto p = random_attention(5, 7, 3, act, rng);
        const auto v = random_tensor({4, 5}, rng);
        EXPECT_LT(vse::testing::max_abs_diff(attention_weights(constant(v), p).value(), attention_oracle(v, p)), 1e-12);
    }
}

TEST(AttentionWeights, FeatureDimMismatch) {
    Rng rng(4);
    auto p = random_attention(5, 7, 3, Activation::relu, rng);
    EXPECT_THROW(attention_weights(constant(random_tensor({4, 6}, rng)), p), ShapeError);
}

TEST(AttentionWeights, DropoutOnlyWithRng) {
    Rng rng(5);
    auto p = random_attention(5, 16, 2, Activation::relu, rng);
    p.dropout = 0.5;
    const auto v = constant(random_tensor({6, 5}, rng));
    const auto eval = attention_weights(v, p).value();
    EXPECT_EQ(eval, attention_weights(v, p).value());
    Rng drop(9);
    const auto train = attention_weights(v, p, &drop).value();
    EXPECT_NE(train, eval);
}

TEST(Attend, SelectionAveragingAndLoop) {
    Rng rng(6);
    const auto v = random_tensor({4, 3}, rng);
    auto one_hot = Tensor<double>::matrix(1, 4, {0, 0, 1, 0});
    const auto f = attend(constant(one_hot), constant(v)).value();
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(f[k], v(2, k));

    const auto avg = attend(constant(Tensor<double>(Shape{1, 4}, 0.25)), constant(v)).value();
    for (std::size_t k = 0; k < 3; ++k) {
        const double mean = (v(0, k) + v(1, k) + v(2, k) + v(3, k)) / 4.0;
        EXPECT_NEAR(avg[k], mean, 1e-15);
    }

    const auto m = softmax_rows(constant(random_tensor({3, 4}, rng))).value();
    const auto out = attend(constant(m), constant(v)).value();
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < 3; ++k) {
            double s = 0;
            for (std::size_t j = 0; j < 4; ++j) s += m(i, j) * v(j, k);
            EXPECT_NEAR(out(i, k), s, 1e-6);
        }
    EXPECT_THROW(attend(constant(m), constant(random_tensor({5, 3}, rng))), ShapeError);
}

TEST(Projection, UnitNormAndIdentityCase) {
    Rng rng(7);
    auto proj = make_projection<double>(3, 4, 6, 0.0, rng);
    for (int trial = 0; trial < 20; ++trial) {
        const auto y = project_joint(constant(random_tensor({3, 4}, rng)), proj).value();
        double n = 0;
        for (double v : y.values()) n += v * v;
        ASSERT_NEAR(std::sqrt(n), 1.0, 1e-6);
    }

    ProjectionParams<double> id{{constant(Tensor<double>::identity(4)), constant(Tensor<double>(Shape{4}))}, 0.0};
    const auto f = random_tensor({1, 4}, rng);
    const auto y = project_joint(constant(f), id).value();
    const auto expect = l2_normalize(constant(f)).value();
    EXPECT_LT(vse::testing::max_abs_diff(y.reshaped({4}), expect.reshaped({4})), 1e-15);
}

TEST(Projection, RowPermutationWithPermutedBlocks) {
    Rng rng(8);
    const std::size_t r = 3, d = 4, out = 5;
    auto proj = make_projection<double>(r, d, out, 0.0, rng);
    const auto f = random_tensor({r, d}, rng);
    const std::vector<std::size_t> perm{2, 0, 1};
    Tensor<double> pf(Shape{r, d});
    Tensor<double> pw(Shape{r * d, out});
    const auto& w = proj.layer.weight.value();
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t k = 0; k < d; ++k) pf(i, k) = f(perm[i], k);
        for (std::size_t k = 0; k < d; ++k)
            for (std::size_t o = 0; o < out; ++o) pw(i * d + k, o) = w(perm[i] * d + k, o);
    }
    ProjectionParams<double> permuted{{constant(pw), proj.layer.bias}, 0.0};
    const auto a = project_joint(constant(f), proj).value();
    const auto b = project_joint(constant(pf), permuted).value();
    EXPECT_LT(vse::testing::max_abs_diff(a, b), 1e-12);
}

TEST(Projection, DegenerateInput) {
    ProjectionParams<double> zero{{constant(Tensor<double>(Shape{4, 3})), constant(Tensor<double>(Shape{3}))}, 0.0};
    EXPECT_THROW(project_joint(constant(Tensor<double>(Shape{1, 4}, 1.0)), zero), DegenerateVectorError);
}

TEST(EncodeItem, ComposesTheThreeOps) {
    Rng rng(9);
    auto attn = make_attention<double>(6, 5, 2, Activation::tanh, 0.5, rng);
    auto proj = make_projection<double>(2, 6, 4, 0.5, rng);
    const auto v = constant(random_tensor({7, 6}, rng));
    const auto item = encode_item(v, attn, proj);
    const auto m = attention_weights(v, attn);
    const auto joint = project_joint(attend(m, v), proj);
    EXPECT_EQ(item.weights.value(), m.value());
    EXPECT_EQ(item.joint.value(), joint.value());
    EXPECT_EQ(encode_item(v, attn, proj).joint.value(), item.joint.value());
}

TEST(EncodeItem, GradientCheck) {
    Rng rng(10);
    auto attn = make_attention<double>(4, 3, 2, Activation::tanh, 0.0, rng);
    auto proj = make_projection<double>(2, 4, 3, 0.0, rng);
    const auto w = random_tensor({1, 3}, rng);
    ScalarFunction<double> f = [&](std::span<Var<double>> in) {
        AttentionParams<double> a{in[1], in[2], Activation::tanh, 0.0};
        ProjectionParams<double> p{{in[3], in[4]}, 0.0};
        auto item = encode_item(in[0], a, p);
        return add(sum(mul(item.joint, constant(w))), frobenius_sq(item.weights));
    };
    const auto r = grad_check<double>(f,
                                      {random_tensor({5, 4}, rng), attn.hidden_weight.value(), attn.head_weight.value(),
                                       proj.layer.weight.value(), proj.layer.bias.value()},
                                      1e-5);
    EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(AttentionProperty, RowsStochasticConvexAndPermutationCovariant) {
    Rng rng(11);
    std::uniform_int_distribution<std::size_t> len(1, 12);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t l = len(rng), d = 5;
        auto p = random_attention(d, 6, 3, trial % 2 ? Activation::relu : Activation::tanh, rng);
        const auto v = random_tensor({l, d}, rng, -3, 3);
        const auto m = attention_weights(constant(v), p).value();
        const auto f = attend(constant(m), constant(v)).value();
        for (std::size_t i = 0; i < 3; ++i) {
            double s = 0;
            for (std::size_t j = 0; j < l; ++j) s += m(i, j);
            ASSERT_NEAR(s, 1.0, 1e-6);
            for (std::size_t k = 0; k < d; ++k) {
                double lo = v(0, k), hi = v(0, k);
                for (std::size_t j = 1; j < l; ++j) lo = std::min(lo, v(j, k)), hi = std::max(hi, v(j, k));
                ASSERT_GE(f(i, k), lo - 1e-12);
                ASSERT_LE(f(i, k), hi + 1e-12);
            }
        }
        std::vector<std::size_t> perm(l);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Tensor<double> pv(Shape{l, d});
        for (std::size_t j = 0; j < l; ++j)
            for (std::size_t k = 0; k < d; ++k) pv(j, k) = v(perm[j], k);
        const auto pm = attention_weights(constant(pv), p).value();
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < l; ++j) ASSERT_EQ(pm(i, j), m(i, perm[j]));
        const auto pf = attend(constant(pm), constant(pv)).value();
        ASSERT_LT(vse::testing::max_abs_diff(pf, f), 1e-12);
    }
}

TEST(AttentionProperty, SingleHeadIsSoftmaxPooling) {
    Rng rng(12);
    auto p = random_attention(4, 3, 1, Activation::relu, rng);
    const auto v = random_tensor({6, 4}, rng);
    const auto m = attention_weights(constant(v), p).value();
    EXPECT_EQ(m.dims(), (Shape{1, 6}));
    const auto f = attend(constant(m), constant(v)).value();
    for (std::size_t k = 0; k < 4; ++k) {
        double s = 0;
        for (std::size_t j = 0; j < 6; ++j) s += m[j] * v(j, k);
        EXPECT_NEAR(f[k], s, 1e-14);
    }
}

TEST(Heatmap, BilinearCenterAndCorners) {
    const std::vector<double> row{0, 1, 1, 0};
    const auto r = attention_to_heatmap(row, 2, 2, 3, 3);
    EXPECT_EQ(r.width, 3u);
    EXPECT_EQ(r.height, 3u);
    EXPECT_NEAR(r.at(1, 1), 0.5, 1e-12);
    EXPECT_EQ(r.at(0, 0), 0.0);
    EXPECT_EQ(r.at(2, 0), 1.0);
    EXPECT_EQ(r.at(0, 2), 1.0);
    EXPECT_EQ(r.at(2, 2), 0.0);
}

TEST(Heatmap, ConstantRowAndRange) {
    const std::vector<double> flat(6, 0.25);
    const auto c = attention_to_heatmap(flat, 3, 2, 96, 64);
    for (double v : c.pixels) EXPECT_DOUBLE_EQ(v, 0.25);

    Rng rng(13);
    const auto row = random_tensor<double>({12}, rng, 0, 1);
    const auto r = attention_to_heatmap(row.values(), 4, 3, 17, 11);
    const auto [lo, hi] = std::minmax_element(row.vec().begin(), row.vec().end());
    for (double v : r.pixels) {
        EXPECT_GE(v, *lo - 1e-12);
        EXPECT_LE(v, *hi + 1e-12);
    }
    EXPECT_DOUBLE_EQ(r.at(0, 0), row[0]);
    EXPECT_DOUBLE_EQ(r.at(16, 0), row[3]);
    EXPECT_DOUBLE_EQ(r.at(0, 10), row[8]);
    EXPECT_DOUBLE_EQ(r.at(16, 10), row[11]);
}

TEST(Heatmap, Errors) {
    const std::vector<double> row(5, 0.2);
    EXPECT_THROW(attention_to_heatmap(row, 2, 2, 4, 4), ShapeError);
    const std::vector<double> four(4, 0.25);
    EXPECT_THROW(attention_to_heatmap(four, 2, 2, 1, 4), ShapeError);
}
