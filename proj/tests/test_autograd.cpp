#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "vse/errors.hpp"
#include "vse/gradcheck.hpp"

using namespace vse;
using vse::testing::random_tensor;

namespace {

Var<double> mat(std::size_t r, std::size_t c, std::vector<double> v) {
    return constant(Tensor<double>::matrix(r, c, std::move(v)));
}

}  // namespace

TEST(Autograd, MatmulHandValue) {
    auto y = matmul(mat(2, 2, {1, 2, 3, 4}), mat(2, 1, {5, 6}));
    EXPECT_EQ(y.dims(), (Shape{2, 1}));
    EXPECT_DOUBLE_EQ(y.value()[0], 17.0);
    EXPECT_DOUBLE_EQ(y.value()[1], 39.0);
}

TEST(Autograd, MatmulShapeMismatch) {
    EXPECT_THROW(matmul(mat(2, 3, {1, 2, 3, 4, 5, 6}), mat(2, 1, {1, 2})), ShapeError);
}

TEST(Autograd, SoftmaxHandValue) {
    auto s = softmax_rows(mat(1, 2, {std::log(3.0), 0.0}));
    EXPECT_NEAR(s.value()[0], 0.75, 1e-15);
    EXPECT_NEAR(s.value()[1], 0.25, 1e-15);
}

TEST(Autograd, SoftmaxStableForLargeLogits) {
    auto s = softmax_rows(mat(1, 3, {1000.0, 1000.0, -1000.0}));
    EXPECT_NEAR(s.value()[0], 0.5, 1e-12);
    EXPECT_NEAR(s.value()[2], 0.0, 1e-12);
}

TEST(Autograd, TanhAndRelu) {
    EXPECT_NEAR(tanh_act(mat(1, 1, {1.0})).value()[0], 0.7615941559557649, 1e-15);
    auto r = relu(mat(1, 3, {-1.0, 0.0, 2.0}));
    EXPECT_EQ(r.value().vec(), (std::vector<double>{0.0, 0.0, 2.0}));
}

TEST(Autograd, ReluSubgradientAtZeroIsZero) {
    auto x = parameter(Tensor<double>::matrix(1, 2, {0.0, 1.0}));
    backward(sum(relu(x)));
    EXPECT_EQ(x.grad()[0], 0.0);
    EXPECT_EQ(x.grad()[1], 1.0);
}

TEST(Autograd, NormalizeAndCosine) {
    auto n = l2_normalize(mat(1, 2, {3, 4}));
    EXPECT_NEAR(n.value()[0], 0.6, 1e-15);
    EXPECT_NEAR(n.value()[1], 0.8, 1e-15);
    auto c = cosine(mat(1, 2, {1, 0}), mat(1, 2, {1, 1}));
    EXPECT_NEAR(c.value().item(), 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(Autograd, NormalizeZeroVectorIsDegenerate) {
    EXPECT_THROW(l2_normalize(mat(1, 3, {0, 0, 0})), DegenerateVectorError);
    EXPECT_THROW(l2_normalize_rows(mat(2, 2, {1, 0, 0, 0})), DegenerateVectorError);
}

TEST(Autograd, FrobeniusSquared) { EXPECT_DOUBLE_EQ(frobenius_sq(mat(2, 2, {1, 2, 3, 4})).value().item(), 30.0); }

TEST(Autograd, NonFiniteInputFailsFast) {
    EXPECT_THROW(matmul(mat(1, 1, {std::nan("")}), mat(1, 1, {1.0})), NumericError);
    EXPECT_THROW(add(mat(1, 1, {INFINITY}), mat(1, 1, {1.0})), NumericError);
}

TEST(Autograd, BackwardRequiresScalar) {
    auto x = parameter(Tensor<double>(Shape{2, 2}, 1.0));
    EXPECT_THROW(backward(mul(x, x)), ContractError);
}

TEST(Autograd, GradientsOfUnusedParameterAreZero) {
    auto a = parameter(Tensor<double>(Shape{2}, 1.0));
    auto b = parameter(Tensor<double>(Shape{2}, 1.0));
    std::vector<Var<double>> ps{a, b};
    const auto g = gradients(sum(scale(a, 3.0)), std::span<Var<double>>(ps));
    EXPECT_EQ(g[0].vec(), (std::vector<double>{3, 3}));
    EXPECT_EQ(g[1].vec(), (std::vector<double>{0, 0}));
}

TEST(Autograd, GradientsAccumulateAcrossReuse) {
    auto x = parameter(Tensor<double>::scalar(2.0));
    std::vector<Var<double>> ps{x};
    // d/dx (x*x + x) = 2x + 1
    const auto g = gradients(add(mul(x, x), x), std::span<Var<double>>(ps));
    EXPECT_DOUBLE_EQ(g[0].item(), 5.0);
    // Repeated calls do not accumulate stale gradients.
    const auto g2 = gradients(add(mul(x, x), x), std::span<Var<double>>(ps));
    EXPECT_DOUBLE_EQ(g2[0].item(), 5.0);
}

TEST(Autograd, NoGradGuardRecordsNothing) {
    auto x = parameter(Tensor<double>::scalar(2.0));
    Var<double> y;
    {
        NoGradGuard guard;
        y = mul(x, x);
    }
    EXPECT_TRUE(y.node()->inputs.empty());
    EXPECT_FALSE(y.requires_grad());
    EXPECT_TRUE(NoGradGuard::grad_enabled());
}

TEST(Autograd, DropoutZeroIsIdentityAndScalesKeptEntries) {
    Rng rng(3);
    auto x = constant(Tensor<double>(Shape{50, 40}, 1.0));
    EXPECT_EQ(dropout(x, 0.0, rng).node(), x.node());
    auto y = dropout(x, 0.25, rng);
    std::size_t kept = 0;
    for (double v : y.value().values()) {
        ASSERT_TRUE(v == 0.0 || std::abs(v - 1.0 / 0.75) < 1e-12);
        kept += v != 0.0;
    }
    EXPECT_NEAR(double(kept) / 2000.0, 0.75, 0.05);
}

TEST(Autograd, GatherScatterAdds) {
    auto x = parameter(Tensor<double>::matrix(1, 3, {1, 2, 3}));
    backward(sum(gather(x, {0, 0, 2}, Shape{3})));
    EXPECT_EQ(x.grad().vec(), (std::vector<double>{2, 0, 1}));
}

// --- properties over random inputs ---------------------------------------------------------

TEST(AutogradProperty, SoftmaxRowsAreStochastic) {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        auto s = softmax_rows(constant(random_tensor({4, 7}, rng, -20, 20)));
        for (std::size_t r = 0; r < 4; ++r) {
            double row = 0;
            for (std::size_t c = 0; c < 7; ++c) {
                const double v = s.value()(r, c);
                ASSERT_GT(v, 0.0);
                ASSERT_LT(v, 1.0);
                row += v;
            }
            ASSERT_NEAR(row, 1.0, 1e-6);
        }
    }
}

TEST(AutogradProperty, MatmulAssociative) {
    Rng rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        auto a = constant(random_tensor({3, 4}, rng));
        auto b = constant(random_tensor({4, 5}, rng));
        auto c = constant(random_tensor({5, 2}, rng));
        const auto left = matmul(matmul(a, b), c).value();
        const auto right = matmul(a, matmul(b, c)).value();
        for (std::size_t i = 0; i < left.size(); ++i) {
            ASSERT_LE(std::abs(left[i] - right[i]), 1e-6 * std::max(1.0, std::abs(left[i])));
        }
    }
}

TEST(AutogradProperty, NormalizeIdempotent) {
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        auto v = constant(random_tensor({1, 9}, rng, -5, 5));
        const auto once = l2_normalize(v).value();
        const auto twice = l2_normalize(l2_normalize(v)).value();
        ASSERT_LE(vse::testing::max_abs_diff(once, twice), 1e-12);
    }
}

TEST(AutogradProperty, CosineScaleInvariant) {
    Rng rng(14);
    std::uniform_real_distribution<double> pos(0.01, 100.0);
    for (int trial = 0; trial < 100; ++trial) {
        auto u = constant(random_tensor({1, 6}, rng));
        auto v = constant(random_tensor({1, 6}, rng));
        const double base = cosine(u, v).value().item();
        const double scaled = cosine(scale(u, pos(rng)), scale(v, pos(rng))).value().item();
        ASSERT_NEAR(base, scaled, 1e-10);
    }
}

// --- finite-difference checker -----------------------------------------------------------

TEST(GradCheck, LinearFunctionIsExact) {
    Rng rng(21);
    const auto w = random_tensor({4, 3}, rng);
    ScalarFunction<double> f = [&](std::span<Var<double>> in) { return sum(matmul(in[0], constant(w))); };
    const auto r = grad_check<double>(f, {random_tensor({2, 4}, rng)}, 1e-5);
    EXPECT_LT(r.max_rel_error, 1e-10);
    EXPECT_EQ(r.coords_checked, 8u);
}

TEST(GradCheck, SoftmaxSumOfSquares) {
    Rng rng(22);
    ScalarFunction<double> f = [](std::span<Var<double>> in) { return frobenius_sq(softmax_rows(in[0])); };
    EXPECT_LT(grad_check<double>(f, {random_tensor({3, 5}, rng)}, 1e-5).max_rel_error, 1e-6);
}

TEST(GradCheck, ReluAwayFromKink) {
    ScalarFunction<double> f = [](std::span<Var<double>> in) { return frobenius_sq(relu(in[0])); };
    const auto point = Tensor<double>::matrix(2, 3, {-0.8, 0.3, 1.2, -0.05, 0.7, -2.0});
    EXPECT_LT(grad_check<double>(f, {point}, 1e-5).max_rel_error, 1e-6);
}

TEST(GradCheck, DetectsWrongGradient) {
    // A function whose recorded backward is deliberately inconsistent: the value of
    // x*c with c a constant copy of x has gradient c, not 2x.
    ScalarFunction<double> f = [](std::span<Var<double>> in) { return sum(mul(in[0], constant(in[0].value()))); };
    const auto r = grad_check<double>(f, {Tensor<double>::matrix(1, 2, {1.0, 2.0})}, 1e-5);
    EXPECT_GT(r.max_rel_error, 0.1);
}

// Every op at 10 random points, avoiding relu kinks.
TEST(GradCheckProperty, OpsAtRandomPoints) {
    using F = std::function<Var<double>(std::span<Var<double>>)>;
    struct Case {
        const char* name;
        F f;
        std::vector<Shape> shapes;
    };
    const std::vector<Case> cases = {
        {"matmul", [](auto in) { return matmul(in[0], in[1]); }, {{2, 3}, {3, 2}}},
        {"transpose", [](auto in) { return transpose(in[0]); }, {{2, 3}}},
        {"mul", [](auto in) { return mul(in[0], in[1]); }, {{2, 3}, {2, 3}}},
        {"add_row_bias", [](auto in) { return add_row_bias(in[0], in[1]); }, {{2, 3}, {3}}},
        {"relu", [](auto in) { return relu(in[0]); }, {{3, 3}}},
        {"tanh", [](auto in) { return tanh_act(in[0]); }, {{3, 3}}},
        {"softmax_rows", [](auto in) { return softmax_rows(in[0]); }, {{2, 4}}},
        {"l2_normalize", [](auto in) { return l2_normalize(in[0]); }, {{1, 4}}},
        {"l2_normalize_rows", [](auto in) { return l2_normalize_rows(in[0]); }, {{3, 4}}},
        {"cosine", [](auto in) { return cosine(in[0], in[1]); }, {{4}, {4}}},
        {"frobenius_sq", [](auto in) { return frobenius_sq(in[0]); }, {{2, 2}}},
        {"mean", [](auto in) { return mean(in[0]); }, {{2, 2}}},
        {"concat_cols", [](auto in) { return concat_cols(in[0], in[1]); }, {{2, 2}, {2, 1}}},
    };
    Rng rng(23);
    for (const auto& c : cases) {
        for (int point = 0; point < 10; ++point) {
            const auto weights = random_tensor({64}, rng);
            ScalarFunction<double> g = [&](std::span<Var<double>> in) {
                auto y = c.f(in);
                auto w = constant(Tensor<double>(y.dims(), std::vector<double>(weights.vec().begin(),
                                                                                weights.vec().begin() + y.size())));
                return sum(mul(y, w));
            };
            std::vector<Tensor<double>> inputs;
            for (const auto& s : c.shapes) {
                auto t = random_tensor(s, rng);
                for (auto& v : t.values()) {
                    if (std::abs(v) < 0.05) v = 0.5;  // keep off the relu kink
                }
                inputs.push_back(t);
            }
            const auto r = grad_check<double>(g, inputs, 1e-5);
            ASSERT_LT(r.max_rel_error, 1e-4) << c.name << " at point " << point;
        }
    }
}
