#include <gtest/gtest.h>

#include "metafilter/nn/norm.hpp"
#include "support/gradcheck.hpp"

using namespace metafilter;
using nn::Tensor;
using testsupport::kGradTolerance;
using testsupport::kTrials;
using testsupport::max_gradient_error;

TEST(BatchNorm, TrainingNormalizesPerChannel) {
    Rng rng(1);
    auto x = testsupport::random_tensor(rng, {4, 3, 5, 5}, -2, 3, false);
    auto scale = Tensor<double>({3}, {1.0, 2.0, 0.5});
    auto shift = Tensor<double>({3}, {0.0, -1.0, 4.0});
    auto rm = Tensor<double>::zeros({3});
    auto rv = Tensor<double>::full({3}, 1.0);
    auto y = nn::batch_norm(x, scale, shift, rm, rv, true);
    for (std::size_t c = 0; c < 3; ++c) {
        double s = 0, ss = 0;
        for (std::size_t b = 0; b < 4; ++b)
            for (std::size_t i = 0; i < 25; ++i) {
                const double v = y[(b * 3 + c) * 25 + i];
                s += v;
                ss += v * v;
            }
        const double mean = s / 100, var = ss / 100 - mean * mean;
        EXPECT_NEAR(mean, shift[c], 1e-9);
        EXPECT_NEAR(var, scale[c] * scale[c], 1e-3 * scale[c] * scale[c]);
    }
}

TEST(BatchNorm, RunningStatisticsUpdate) {
    auto x = Tensor<double>({4, 1}, {1, 2, 3, 6});
    auto rm = Tensor<double>::zeros({1});
    auto rv = Tensor<double>::full({1}, 1.0);
    nn::batch_norm(x, Tensor<double>::full({1}, 1.0), Tensor<double>::zeros({1}), rm, rv, true);
    // mean 3, unbiased variance 14/3
    EXPECT_NEAR(rm[0], 0.1 * 3.0, 1e-12);
    EXPECT_NEAR(rv[0], 0.9 + 0.1 * 14.0 / 3.0, 1e-12);
}

TEST(BatchNorm, EvalUsesRunningStatsAndLeavesThem) {
    auto x = Tensor<double>({2, 1}, {1.0, 5.0});
    auto rm = Tensor<double>({1}, {2.0});
    auto rv = Tensor<double>({1}, {4.0});
    auto y = nn::batch_norm(x, Tensor<double>::full({1}, 3.0), Tensor<double>::full({1}, 0.5), rm, rv, false);
    const double is = 1.0 / std::sqrt(4.0 + 1e-5);
    EXPECT_NEAR(y[0], 3.0 * (1.0 - 2.0) * is + 0.5, 1e-12);
    EXPECT_NEAR(y[1], 3.0 * (5.0 - 2.0) * is + 0.5, 1e-12);
    EXPECT_EQ(rm[0], 2.0);
    EXPECT_EQ(rv[0], 4.0);
}

TEST(BatchNorm, ShapeErrors) {
    auto rm = Tensor<double>::zeros({2});
    auto rv = Tensor<double>::full({2}, 1.0);
    EXPECT_THROW(nn::batch_norm(Tensor<double>::zeros({2, 3}), Tensor<double>::zeros({2}), Tensor<double>::zeros({2}), rm, rv, true),
                 ShapeError);
    EXPECT_THROW(nn::batch_norm(Tensor<double>::zeros({2, 2, 2}), Tensor<double>::zeros({2}), Tensor<double>::zeros({2}), rm, rv, true),
                 ShapeError);
    EXPECT_THROW(nn::batch_norm(Tensor<double>::zeros({1, 2}), Tensor<double>::zeros({2}), Tensor<double>::zeros({2}), rm, rv, true),
                 ShapeError);
}

TEST(BatchNorm, TrainingGradientMatchesFiniteDifferences) {
    Rng rng(2);
    for (int t = 0; t < kTrials; ++t) {
        auto x = testsupport::random_tensor(rng, {3, 2, 3, 3});
        auto g = testsupport::random_tensor(rng, {2}, 0.5, 1.5);
        auto b = testsupport::random_tensor(rng, {2});
        auto rm = Tensor<double>::zeros({2});
        auto rv = Tensor<double>::full({2}, 1.0);
        const double err = max_gradient_error(
            {x, g, b}, [&] { return testsupport::weighted_sum(nn::batch_norm(x, g, b, rm, rv, true), t); });
        EXPECT_LT(err, kGradTolerance) << "trial " << t;
    }
}

TEST(BatchNorm, EvalGradientMatchesFiniteDifferences) {
    Rng rng(3);
    for (int t = 0; t < kTrials; ++t) {
        auto x = testsupport::random_tensor(rng, {4, 3});
        auto g = testsupport::random_tensor(rng, {3}, 0.5, 1.5);
        auto b = testsupport::random_tensor(rng, {3});
        auto rm = testsupport::random_tensor(rng, {3}, -1, 1, false);
        auto rv = testsupport::random_tensor(rng, {3}, 0.5, 2, false);
        const double err = max_gradient_error(
            {x, g, b}, [&] { return testsupport::weighted_sum(nn::batch_norm(x, g, b, rm, rv, false), t); });
        EXPECT_LT(err, kGradTolerance) << "trial " << t;
    }
}
