#include <gtest/gtest.h>

#include "mgcn/errors.hpp"
#include "mgcn/model_zoo.hpp"
#include "reference.hpp"

using namespace mgcn;

namespace {

std::vector<Shape> trace_shapes(const Network& net) {
    std::vector<Shape> out;
    for (const auto& e : shape_trace(net)) out.push_back(e.shape);
    return out;
}

std::size_t conv_params(std::size_t in, std::size_t out, std::size_t k) { return out * (in * k * k + 1); }
std::size_t dense_params(std::size_t in, std::size_t out) { return out * (in + 1); }
std::size_t pooled(std::size_t in) { return (in - 3) / 2 + 1; }

std::size_t custom_cnn_count(std::size_t img) {
    const std::size_t side = img / 16;
    return conv_params(1, 32, 3) + conv_params(32, 64, 3) + conv_params(64, 128, 3) + conv_params(128, 256, 3) +
           conv_params(256, 256, 3) + dense_params(side * side * 256, 32) + dense_params(32, 1);
}

std::size_t alexnet_count(std::size_t img) {
    const std::size_t side = pooled(pooled(pooled((img - 11) / 4 + 1)));
    return conv_params(3, 96, 11) + conv_params(96, 256, 5) + conv_params(256, 384, 3) + conv_params(384, 384, 3) +
           conv_params(384, 256, 3) + dense_params(side * side * 256, 4096) + dense_params(4096, 4096) +
           dense_params(4096, 1);
}

std::size_t inception_block_count(std::size_t c, const std::array<std::size_t, 7>& f) {
    return conv_params(c, f[0], 1) + conv_params(c, f[1], 1) + conv_params(f[1], f[2], 3) + conv_params(c, f[3], 1) +
           conv_params(f[3], f[4], 3) + conv_params(f[4], f[5], 3) + conv_params(c, f[6], 1);
}

std::size_t inception_count(std::size_t img) {
    const std::size_t side = (img + 1) / 2;
    return conv_params(3, 32, 3) + conv_params(32, 32, 3) + conv_params(32, 64, 3) +
           inception_block_count(64, {64, 96, 128, 16, 32, 32, 32}) +
           inception_block_count(256, {128, 128, 192, 32, 96, 64, 64}) + dense_params(side * side * 448, 256) +
           dense_params(256, 1);
}

void expect_sigmoid_tail(const Network& net) {
    const auto* last = std::get_if<DenseSpec>(&net.layers.back().kind);
    ASSERT_NE(last, nullptr);
    EXPECT_EQ(last->units, 1u);
    EXPECT_EQ(last->activation, Activation::sigmoid);
}

void expect_open_unit_outputs(Network net, std::size_t batch) {
    net.init(3);
    net.set_mode(Mode::eval);
    ref::Gen g(5);
    Shape s = net.sample_shape();
    s.insert(s.begin(), batch);
    const Tensor out = net.forward(g.tensor(s, 0.0f, 1.0f));
    ASSERT_EQ(out.shape(), (Shape{batch, 1}));
    for (float v : out.data()) {
        EXPECT_GT(v, 0.0f);
        EXPECT_LT(v, 1.0f);
    }
}

}  // namespace

TEST(CustomCnn, ShapeTraceAt64) {
    const Network net = build_custom_cnn(64);
    EXPECT_EQ(net.input_shape, (Shape{64, 64, 1}));
    const std::vector<Shape> want{{32, 64, 64}, {32, 32, 32}, {64, 32, 32}, {64, 16, 16}, {128, 16, 16}, {128, 8, 8},
                                  {256, 8, 8},  {256, 8, 8},  {256, 4, 4},  {4096},       {32},         {1}};
    EXPECT_EQ(trace_shapes(net), want);
    expect_sigmoid_tail(net);
}

TEST(CustomCnn, SevenParameterizedLayers) {
    Network net = build_custom_cnn(32);
    net.init(0);
    std::size_t with_params = 0;
    for (const auto& s : net.states) with_params += s.params.empty() ? 0 : 1;
    EXPECT_EQ(with_params, 7u);
}

TEST(CustomCnn, TooSmall) { EXPECT_THROW(build_custom_cnn(8), ConfigError); }

TEST(AlexNet, ShapeTraceAt227) {
    const std::vector<Shape> want{{96, 55, 55}, {96, 27, 27},  {256, 27, 27}, {256, 13, 13},
                                  {384, 13, 13}, {384, 13, 13}, {256, 13, 13}, {256, 6, 6},
                                  {9216},        {4096},        {4096},        {1}};
    const Network net = build_alexnet(227);
    EXPECT_EQ(net.input_shape, (Shape{227, 227, 3}));
    EXPECT_EQ(trace_shapes(net), want);
}

TEST(AlexNet, AllPoolsAre3x3Stride2) {
    for (const auto& l : build_alexnet(227).layers) {
        if (const auto* p = std::get_if<MaxPoolSpec>(&l.kind)) {
            EXPECT_EQ(p->window, (Extent2{3, 3}));
            EXPECT_EQ(p->stride, (Extent2{2, 2}));
        }
    }
}

TEST(AlexNet, TooSmall) {
    EXPECT_THROW(build_alexnet(32), ConfigError);
    EXPECT_NO_THROW(build_alexnet(67));
}

TEST(InceptionV4, ChannelTraceAndFlatten) {
    const Network net = build_inception_v4(32);
    const auto t = trace_shapes(net);
    ASSERT_EQ(t.size(), 9u);
    std::vector<std::size_t> channels{net.input_shape[2]};
    for (std::size_t i = 0; i < 6; ++i) channels.push_back(t[i][0]);
    EXPECT_EQ(channels, (std::vector<std::size_t>{3, 32, 32, 64, 256, 448, 448}));
    EXPECT_EQ(t[5], (Shape{448, 16, 16}));
    EXPECT_EQ(t[6], (Shape{114688}));
    std::size_t blocks = 0;
    for (const auto& l : net.layers) blocks += std::holds_alternative<BranchSpec>(l.kind);
    EXPECT_EQ(blocks, 2u);
}

TEST(InceptionBlock, ListedFilterSets) {
    const std::array<std::size_t, 7> a{64, 96, 128, 16, 32, 32, 32}, b{128, 128, 192, 32, 96, 64, 64};
    EXPECT_EQ(output_shape(inception_block(a), {7, 9, 11}), (Shape{256, 9, 11}));
    EXPECT_EQ(output_shape(inception_block(b), {256, 5, 5}), (Shape{448, 5, 5}));
    EXPECT_THROW(inception_block(std::vector<std::size_t>{1, 2, 3}), ConfigError);
}

TEST(InceptionBlock, ChannelSumProperty) {
    ref::Gen g(31);
    for (int trial = 0; trial < 200; ++trial) {
        std::array<std::size_t, 7> f;
        for (auto& v : f) v = g.pick(1, 40);
        const Shape in{g.pick(1, 16), g.pick(1, 9), g.pick(1, 9)};
        EXPECT_EQ(output_shape(inception_block(f), in), (Shape{f[0] + f[2] + f[5] + f[6], in[1], in[2]}));
    }
}

TEST(DenseNetMini, BlockAndTransitionArithmetic) {
    const Network base = densenet_mini_base(16, 2, 4, 12);
    const auto t = trace_shapes(base);
    EXPECT_EQ(t[0][0], 24u);
    EXPECT_EQ(t[4], (Shape{72, 16, 16}));
    EXPECT_EQ(t[7], (Shape{36, 8, 8}));
    EXPECT_EQ(t.back(), (Shape{36 + 4 * 12, 8, 8}));
}

TEST(DenseNetMini, ClosedFormTraceProperty) {
    ref::Gen g(32);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t blocks = g.pick(1, 3), layers = g.pick(1, 4), growth = g.pick(1, 10);
        const std::size_t img = g.pick(1u << (blocks - 1), 20);
        const Network net = build_densenet_mini(img, blocks, layers, growth);
        const auto t = trace_shapes(net);
        std::size_t c = 2 * growth, side = img, i = 1;
        for (std::size_t b = 0; b < blocks; ++b) {
            for (std::size_t l = 0; l < layers; ++l, ++i) {
                c += growth;
                ASSERT_EQ(t[i], (Shape{c, side, side}));
            }
            if (b + 1 < blocks) {
                c /= 2;
                side /= 2;
                i += 3;
                ASSERT_EQ(t[i - 1], (Shape{c, side, side}));
            }
        }
        EXPECT_EQ(t[i], (Shape{c}));
        expect_sigmoid_tail(net);
    }
}

TEST(DenseNetMini, InvalidCounts) {
    EXPECT_THROW(build_densenet_mini(16, 1, 0, 8), ConfigError);
    EXPECT_THROW(build_densenet_mini(16, 0, 4, 8), ConfigError);
    EXPECT_THROW(build_densenet_mini(2, 3, 1, 8), ConfigError);
}

TEST(VggMini, ShapeTrace) {
    const std::vector<std::size_t> stages{64, 128}, head{256};
    const Network net = build_vgg_mini(32, stages, head);
    const auto t = trace_shapes(net);
    EXPECT_EQ(t[2], (Shape{64, 16, 16}));
    EXPECT_EQ(t[5], (Shape{128, 8, 8}));
    EXPECT_EQ(t[6], (Shape{8 * 8 * 128}));
    EXPECT_EQ(t[7], (Shape{256}));
    EXPECT_THROW(build_vgg_mini(32, std::vector<std::size_t>{}, head), ConfigError);
}

TEST(VggMini, Vgg19Head) {
    const std::vector<std::size_t> stages{8}, head{4096, 4096};
    const Network net = build_vgg_mini(8, stages, head);
    const auto n = net.layers.size();
    EXPECT_EQ(std::get<DenseSpec>(net.layers[n - 3].kind).units, 4096u);
    EXPECT_EQ(std::get<DenseSpec>(net.layers[n - 2].kind).units, 4096u);
}

TEST(AttachHead, DenseNet121Listing) {
    const std::vector<std::size_t> head{32};
    const Network base = densenet_mini_base(16, 1, 2, 4);
    const std::size_t base_layers = base.layers.size();
    Network net = attach_head(base, HeadPool::flatten, head, 0.2f, true);
    ASSERT_EQ(net.layers.size(), base_layers + 4);
    EXPECT_TRUE(std::holds_alternative<FlattenSpec>(net.layers[base_layers].kind));
    EXPECT_EQ(std::get<DenseSpec>(net.layers[base_layers + 1].kind).units, 32u);
    EXPECT_FLOAT_EQ(std::get<DropoutSpec>(net.layers[base_layers + 2].kind).rate, 0.2f);
    expect_sigmoid_tail(net);
    EXPECT_EQ(net.frozen_prefix, base_layers);
    net.init(1);
    const std::size_t flat = 16 * 16 * (8 + 2 * 4);
    EXPECT_EQ(net.parameter_count(true), dense_params(flat, 32) + dense_params(32, 1));
}

TEST(AttachHead, InceptionV3Listing) {
    const std::vector<std::size_t> head{128};
    const std::vector<std::size_t> stages{8};
    Network net = attach_head(vgg_mini_base(8, stages), HeadPool::global_avg, head, std::nullopt, true);
    const auto n = net.layers.size();
    EXPECT_TRUE(std::holds_alternative<GlobalAvgPoolSpec>(net.layers[n - 3].kind));
    EXPECT_EQ(std::get<DenseSpec>(net.layers[n - 2].kind).units, 128u);
    net.init(0);
    EXPECT_EQ(net.parameter_count(true), dense_params(8, 128) + dense_params(128, 1));
}

TEST(AttachHead, RejectsDenseTail) {
    EXPECT_THROW(attach_head(build_custom_cnn(16), HeadPool::flatten, {}, std::nullopt, false), ConfigError);
}

TEST(ParameterCensus, MatchesClosedFormAtThreeSizes) {
    for (std::size_t img : {16u, 32u, 48u}) {
        Network net = build_custom_cnn(img);
        net.init(0);
        EXPECT_EQ(net.parameter_count(), custom_cnn_count(img)) << img;
    }
    for (std::size_t img : {67u, 99u, 131u}) {
        Network net = build_alexnet(img);
        net.init(0);
        EXPECT_EQ(net.parameter_count(), alexnet_count(img)) << img;
    }
    for (std::size_t img : {8u, 9u, 12u}) {
        Network net = build_inception_v4(img);
        net.init(0);
        EXPECT_EQ(net.parameter_count(), inception_count(img)) << img;
    }
}

TEST(Builders, OutputsStrictlyInsideUnitInterval) {
    const std::vector<std::size_t> stages{8, 16}, head{16};
    expect_open_unit_outputs(build_custom_cnn(16), 3);
    expect_open_unit_outputs(build_alexnet(67), 2);
    expect_open_unit_outputs(build_inception_v4(8), 2);
    expect_open_unit_outputs(build_densenet_mini(8, 2, 2, 4), 3);
    expect_open_unit_outputs(build_vgg_mini(8, stages, head), 3);
}

TEST(Builders, InitIsDeterministic) {
    Network a = build_custom_cnn(16), b = build_custom_cnn(16);
    a.init(5);
    b.init(5);
    const auto ta = a.named_tensors(), tb = b.named_tensors();
    ASSERT_EQ(ta.size(), tb.size());
    for (std::size_t i = 0; i < ta.size(); ++i) {
        EXPECT_EQ(ta[i].name, tb[i].name);
        EXPECT_TRUE(std::equal(ta[i].value.data().begin(), ta[i].value.data().end(), tb[i].value.data().begin()));
    }
}
