#include <gtest/gtest.h>

#include <cmath>

#include "metafilter/nn/optim.hpp"

using namespace metafilter;
using nn::ParamKind;
using nn::ParamStore;

TEST(Adam, FirstStep) {
    ParamStore<double> store;
    auto p = store.add("p", {1}, ParamKind::weight);
    p.values()[0] = 1.0;
    p.zero_grad();
    p.grad()[0] = 2.0;
    nn::adam_step(store, 0.02);
    EXPECT_NEAR(p[0], 1.0 - 0.02 * 2.0 / (2.0 + 1e-8), 1e-15);
    EXPECT_NEAR(p[0], 0.98, 1e-8);
    EXPECT_EQ(store.adam_steps, 1u);
    EXPECT_EQ(p.grad()[0], 2.0);  // left for the caller to reset
}

TEST(Adam, ZeroGradientLeavesParameter) {
    ParamStore<double> store;
    auto p = store.add("p", {3}, ParamKind::weight);
    p.values()[1] = 0.7;
    p.zero_grad();
    nn::adam_step(store, 0.02);
    EXPECT_EQ(p[1], 0.7);
}

TEST(Adam, TrajectoryMatchesScalarRecurrence) {
    // f(x) = 3 (x - 1.5)^2, 10 steps from x = -2.
    ParamStore<double> store;
    auto p = store.add("x", {1}, ParamKind::weight);
    p.values()[0] = -2.0;

    double x = -2.0, m = 0.0, v = 0.0;
    const double b1 = 0.5, b2 = 0.999, eps = 1e-8, lr = 0.1;
    for (int t = 1; t <= 10; ++t) {
        p.zero_grad();
        p.grad()[0] = 6.0 * (p[0] - 1.5);
        nn::adam_step(store, lr);

        const double g = 6.0 * (x - 1.5);
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        x -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
        EXPECT_NEAR(p[0], x, 1e-7) << "step " << t;
    }
}

TEST(Adam, MissingGradientNamesParameter) {
    ParamStore<float> store;
    auto a = store.add("layer.weight", {2}, ParamKind::weight);
    store.add("layer.bias", {2}, ParamKind::bias);
    a.zero_grad();
    try {
        nn::adam_step(store, 0.01);
        FAIL() << "expected StateError";
    } catch (const StateError& e) {
        EXPECT_NE(std::string(e.what()).find("layer.bias"), std::string::npos);
    }
}

TEST(Adam, BuffersNeverUpdated) {
    ParamStore<float> store;
    auto w = store.add("w", {2}, ParamKind::weight);
    auto rm = store.add("rm", {2}, ParamKind::running_mean);
    rm.values()[0] = 0.25f;
    w.zero_grad();
    w.grad()[0] = 1.0f;
    nn::adam_step(store, 0.1);
    EXPECT_EQ(rm[0], 0.25f);
    EXPECT_FALSE(rm.requires_grad());
}

TEST(Adam, FrozenStoreRejected) {
    ParamStore<float> store;
    auto w = store.add("w", {2}, ParamKind::weight);
    w.zero_grad();
    store.set_trainable(false);
    EXPECT_FALSE(w.requires_grad());
    EXPECT_THROW(nn::adam_step(store, 0.1), StateError);
}

TEST(ParamStore, DuplicateNamesRejected) {
    ParamStore<float> store;
    store.add("a", {1}, ParamKind::weight);
    EXPECT_THROW(store.add("a", {2}, ParamKind::bias), ValueError);
    EXPECT_THROW(store.get("missing"), ValueError);
}

TEST(ParamStore, MomentsMatchDims) {
    ParamStore<float> store;
    store.add("a", {2, 3}, ParamKind::weight);
    store.add("b", {3}, ParamKind::bias);
    for (const auto& e : store.entries()) {
        EXPECT_EQ(e.first_moment.size(), e.tensor.numel());
        EXPECT_EQ(e.second_moment.size(), e.tensor.numel());
    }
    EXPECT_EQ(store.count(), 9u);
}

TEST(StepLr, Schedule) {
    EXPECT_DOUBLE_EQ(nn::step_lr(0, 0.02, 100, 0.5), 0.02);
    EXPECT_DOUBLE_EQ(nn::step_lr(99, 0.02, 100, 0.5), 0.02);
    EXPECT_DOUBLE_EQ(nn::step_lr(100, 0.02, 100, 0.5), 0.01);
    EXPECT_DOUBLE_EQ(nn::step_lr(250, 0.02, 100, 0.5), 0.005);
}

TEST(Init, Statistics) {
    ParamStore<float> store;
    store.add("w", {100000}, ParamKind::weight);
    store.add("b", {100}, ParamKind::bias);
    nn::init_weights(store, 17);
    const auto w = store.get("w");
    double s = 0, ss = 0;
    for (float v : w.values()) s += v, ss += double(v) * v;
    const double mean = s / 1e5, sd = std::sqrt(ss / 1e5 - mean * mean);
    EXPECT_NEAR(mean, 0.0, 0.001);
    EXPECT_NEAR(sd, 0.02, 0.002);
    for (float v : store.get("b").values()) EXPECT_EQ(v, 0.0f);
}

TEST(Init, DeterministicPerSeed) {
    auto make = [](std::uint64_t seed) {
        ParamStore<float> store;
        store.add("w", {50}, ParamKind::weight);
        store.add("g", {5}, ParamKind::norm_scale);
        store.add("rv", {5}, ParamKind::running_var);
        nn::init_weights(store, seed);
        return store;
    };
    auto a = make(4), b = make(4), c = make(5);
    for (std::size_t i = 0; i < a.entries().size(); ++i) {
        const auto va = a.entries()[i].tensor.values(), vb = b.entries()[i].tensor.values();
        EXPECT_TRUE(std::equal(va.begin(), va.end(), vb.begin()));
    }
    EXPECT_NE(a.get("w")[0], c.get("w")[0]);
    for (float v : a.get("rv").values()) EXPECT_EQ(v, 1.0f);
    for (float v : a.get("g").values()) EXPECT_NEAR(v, 1.0f, 0.1f);
}
