#include <gtest/gtest.h>

#include <cmath>

#include "mgcn/errors.hpp"
#include "mgcn/layers.hpp"
#include "reference.hpp"

using namespace mgcn;

namespace {

std::vector<float> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

std::size_t census(const LayerSpec& spec, const LayerState& state) {
    std::size_t total = 0;
    visit_tensors(spec, state, [&](const std::string&, const Tensor& t, bool is_buffer) {
        if (!is_buffer && t.trainable()) total += t.size();
    });
    return total;
}

}  // namespace

TEST(InitParams, DenseShapesAndZeroBias) {
    const LayerSpec d = layer::dense(32, Activation::relu);
    const LayerState s = init_params(d, {4096}, 1);
    EXPECT_EQ(s.param("kernel").shape(), (Shape{4096, 32}));
    EXPECT_EQ(s.param("bias").shape(), (Shape{32}));
    for (float b : s.param("bias").data()) EXPECT_EQ(b, 0.0f);
}

TEST(InitParams, AlexNetStemKernel) {
    const LayerState s = init_params(layer::conv2d(96, {11, 11}, Activation::relu, Padding::valid, {4, 4}), {3, 227, 227}, 1);
    EXPECT_EQ(s.param("kernel").shape(), (Shape{96, 3, 11, 11}));
}

TEST(InitParams, SameSeedSameParameters) {
    const LayerSpec c = layer::conv2d(8, {3, 3});
    EXPECT_EQ(values(init_params(c, {3, 8, 8}, 42).param("kernel")), values(init_params(c, {3, 8, 8}, 42).param("kernel")));
    EXPECT_NE(values(init_params(c, {3, 8, 8}, 42).param("kernel")), values(init_params(c, {3, 8, 8}, 43).param("kernel")));
}

TEST(InitParams, HeForReluGlorotOtherwise) {
    const std::size_t fan_in = 200, fan_out = 50;
    const float he = std::sqrt(6.0f / fan_in);
    const float glorot = std::sqrt(6.0f / (fan_in + fan_out));
    for (auto [act, limit] : {std::pair{Activation::relu, he}, std::pair{Activation::sigmoid, glorot},
                              std::pair{Activation::none, glorot}}) {
        const LayerState s = init_params(layer::dense(fan_out, act), {fan_in}, 9);
        float peak = 0.0f;
        for (float w : s.param("kernel").data()) {
            ASSERT_LE(std::fabs(w), limit);
            peak = std::max(peak, std::fabs(w));
        }
        EXPECT_GT(peak, 0.95f * limit);
    }
}

TEST(InitParams, BatchNormDefaults) {
    const LayerState s = init_params(layer::batch_norm(), {4, 2, 2}, 0);
    EXPECT_EQ(values(s.param("gamma")), std::vector<float>(4, 1.0f));
    EXPECT_EQ(values(s.param("beta")), std::vector<float>(4, 0.0f));
    EXPECT_EQ(values(s.buffer("moving_mean")), std::vector<float>(4, 0.0f));
    EXPECT_EQ(values(s.buffer("moving_variance")), std::vector<float>(4, 1.0f));
}

TEST(InitParams, IncompatibleInput) {
    EXPECT_THROW(init_params(layer::dense(3), {2, 4, 4}, 0), ShapeError);
    EXPECT_THROW(init_params(layer::conv2d(3, {5, 5}, Activation::relu, Padding::valid), {1, 3, 3}, 0), ShapeError);
}

TEST(Validate, FieldRanges) {
    EXPECT_THROW(validate(layer::dropout(1.0f)), ConfigError);
    EXPECT_THROW(validate(layer::dropout(-0.1f)), ConfigError);
    EXPECT_THROW(validate(layer::conv2d(0, {3, 3})), ConfigError);
    EXPECT_THROW(validate(layer::dense(0)), ConfigError);
    EXPECT_THROW(validate(layer::branch({{layer::flatten()}})), ConfigError);
    EXPECT_NO_THROW(validate(layer::dropout(0.0f)));
}

TEST(Forward, DropoutEvalIsIdentity) {
    const LayerSpec d = layer::dropout(0.2f);
    LayerState s = init_params(d, {5}, 3);
    set_mode(s, Mode::eval);
    ref::Gen g(1);
    const Tensor x = g.tensor({4, 5});
    EXPECT_EQ(values(forward(d, s, x)), values(x));
}

TEST(Forward, DropoutTrainMaskIsSeeded) {
    const LayerSpec d = layer::dropout(0.5f);
    const Tensor x({1, 64}, 1.0f);
    LayerState a = init_params(d, {64}, 3), b = init_params(d, {64}, 3);
    set_mode(a, Mode::train);
    set_mode(b, Mode::train);
    const auto ya = values(forward(d, a, x));
    EXPECT_EQ(ya, values(forward(d, b, x)));
    for (float v : ya) EXPECT_TRUE(v == 0.0f || v == 2.0f);
}

TEST(Forward, DropoutPreservesExpectation) {
    const LayerSpec d = layer::dropout(0.3f);
    LayerState s = init_params(d, {8}, 5);
    set_mode(s, Mode::train);
    ref::Gen g(2);
    const Tensor x = g.tensor({1, 8}, 0.5f, 2.0f);
    std::vector<double> mean(8, 0.0);
    const int passes = 20000;
    for (int p = 0; p < passes; ++p) {
        const Tensor y = forward(d, s, x);
        for (std::size_t i = 0; i < 8; ++i) mean[i] += y[i];
    }
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(mean[i] / passes, x[i], 0.02 * x[i]);
}

TEST(Forward, FlattenShape) {
    const LayerSpec f = layer::flatten();
    LayerState s = init_params(f, {256, 4, 4}, 0);
    EXPECT_EQ(forward(f, s, Tensor({1, 256, 4, 4})).shape(), (Shape{1, 4096}));
}

TEST(Forward, BatchNormTrainNormalizesPerChannel) {
    const LayerSpec bn = layer::batch_norm();
    LayerState s = init_params(bn, {3, 4, 4}, 0);
    Tensor gamma = s.param("gamma"), beta = s.param("beta");
    for (std::size_t c = 0; c < 3; ++c) {
        gamma.mutable_data()[c] = 0.5f + c;
        beta.mutable_data()[c] = -1.0f + c;
    }
    set_mode(s, Mode::train);
    ref::Gen g(3);
    const Tensor x = g.tensor({5, 3, 4, 4}, -3.0f, 7.0f);
    const Tensor y = forward(bn, s, x);
    for (std::size_t c = 0; c < 3; ++c) {
        double sum = 0.0, sq = 0.0;
        const std::size_t n = 5 * 16;
        for (std::size_t b = 0; b < 5; ++b)
            for (std::size_t p = 0; p < 16; ++p) sum += y[(b * 3 + c) * 16 + p];
        const double mean = sum / n;
        for (std::size_t b = 0; b < 5; ++b)
            for (std::size_t p = 0; p < 16; ++p) sq += std::pow(y[(b * 3 + c) * 16 + p] - mean, 2);
        EXPECT_NEAR(mean, beta[c], 1e-4);
        // The epsilon inside the square root shrinks the variance by var/(var+eps).
        EXPECT_NEAR(sq / n, gamma[c] * gamma[c], 1e-4 * gamma[c] * gamma[c] + 1e-4);
    }
    for (float v : s.buffer("moving_variance").data()) EXPECT_GE(v, 0.0f);
}

TEST(Forward, BatchNormEvalUsesRunningStats) {
    const LayerSpec bn = layer::batch_norm();
    LayerState s = init_params(bn, {2}, 0);
    set_mode(s, Mode::eval);
    const Tensor x({3, 2}, {1, 2, 3, 4, 5, 6});
    const Tensor y = forward(bn, s, x);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i] / std::sqrt(1.0f + kBatchNormEpsilon), 1e-6);
}

TEST(Mode, SwitchingLeavesParametersAlone) {
    const LayerSpec c = layer::conv2d(4, {3, 3});
    LayerState s = init_params(c, {2, 5, 5}, 8);
    const auto before = values(s.param("kernel"));
    set_mode(s, Mode::train);
    set_mode(s, Mode::eval);
    EXPECT_EQ(values(s.param("kernel")), before);
}

TEST(Mode, EvalForwardIsPure) {
    const LayerSpec b = layer::branch({{layer::batch_norm(), layer::activation(Activation::relu)}, {layer::dropout(0.5f)}});
    LayerState s = init_params(b, {2, 3, 3}, 8);
    set_mode(s, Mode::eval);
    ref::Gen g(4);
    const Tensor x = g.tensor({2, 2, 3, 3});
    EXPECT_EQ(values(forward(b, s, x)), values(forward(b, s, x)));
}

TEST(Census, ClosedFormCounts) {
    ref::Gen g(10);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t c = g.pick(1, 8), h = g.pick(3, 9), f = g.pick(1, 16), kh = g.pick(1, 3), kw = g.pick(1, 3);
        const LayerSpec conv = layer::conv2d(f, {kh, kw});
        EXPECT_EQ(census(conv, init_params(conv, {c, h, h}, trial)), f * (c * kh * kw + 1));
        const std::size_t in = g.pick(1, 64), units = g.pick(1, 16);
        const LayerSpec dense = layer::dense(units);
        EXPECT_EQ(census(dense, init_params(dense, {in}, trial)), units * (in + 1));
        const LayerSpec bn = layer::batch_norm();
        EXPECT_EQ(census(bn, init_params(bn, {c, h, h}, trial)), 2 * c);
        const LayerSpec pool = layer::max_pool({2, 2}, {2, 2});
        EXPECT_EQ(census(pool, init_params(pool, {c, h, h}, trial)), 0u);
    }
}

TEST(Trainable, FrozenLayerHasNoTrainableEntries) {
    const LayerSpec conv = layer::conv2d(4, {3, 3});
    LayerState s = init_params(conv, {2, 5, 5}, 1);
    set_trainable(s, false);
    EXPECT_EQ(census(conv, s), 0u);
}

TEST(Names, AssignedRecursively) {
    std::vector<LayerSpec> layers{layer::conv2d(4, {3, 3}), layer::conv2d(4, {3, 3}),
                                  layer::branch({{layer::conv2d(2, {1, 1})}, {}}), layer::flatten()};
    assign_names(layers);
    EXPECT_EQ(layers[0].name, "conv2d_1");
    EXPECT_EQ(layers[1].name, "conv2d_2");
    EXPECT_EQ(layers[3].name, "flatten_1");
    const auto& inner = std::get<BranchSpec>(layers[2].kind).chains[0][0];
    EXPECT_EQ(inner.name, layers[2].name + "/path1/conv2d_1");
}
