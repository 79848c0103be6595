#include "mgcn/model_zoo.hpp"

#include <string>

#include "mgcn/errors.hpp"

namespace mgcn {

namespace {

using layer::avg_pool;
using layer::conv2d;
using layer::dense;
using layer::flatten;
using layer::max_pool;

constexpr Extent2 k1x1{1, 1};
constexpr Extent2 k2x2{2, 2};
constexpr Extent2 k3x3{3, 3};

Network finish(std::vector<LayerSpec> layers, std::size_t img_size, std::size_t channels) {
    Network net;
    net.layers = std::move(layers);
    net.input_shape = {img_size, img_size, channels};
    assign_names(net.layers);
    shape_trace(net);
    return net;
}

bool ends_in_dense(const Network& net) {
    return !net.layers.empty() && std::holds_alternative<DenseSpec>(net.layers.back().kind);
}

}  // namespace

LayerSpec inception_block(std::span<const std::size_t> filters) {
    if (filters.size() != 7) {
        throw ConfigError("inception_block needs exactly 7 filter counts, got " + std::to_string(filters.size()));
    }
    for (std::size_t f : filters) {
        if (f == 0) throw ConfigError("inception_block filter counts must be positive");
    }
    const auto relu = Activation::relu;
    return layer::branch({
        {conv2d(filters[0], k1x1, relu)},
        {conv2d(filters[1], k1x1, relu), conv2d(filters[2], k3x3, relu)},
        {conv2d(filters[3], k1x1, relu), conv2d(filters[4], k3x3, relu), conv2d(filters[5], k3x3, relu)},
        {avg_pool(k3x3, {1, 1}, Padding::same), conv2d(filters[6], k1x1, relu)},
    });
}

Network build_custom_cnn(std::size_t img_size) {
    if (img_size < 16) {
        throw ConfigError("custom cnn needs img_size >= 16 (four 2x2 pools), got " + std::to_string(img_size));
    }
    const auto relu = Activation::relu;
    return finish(
        {
            conv2d(32, k3x3, relu),
            max_pool(k2x2, k2x2),
            conv2d(64, k3x3, relu),
            max_pool(k2x2, k2x2),
            conv2d(128, k3x3, relu),
            max_pool(k2x2, k2x2),
            conv2d(256, k3x3, relu),
            conv2d(256, k3x3, relu),
            max_pool(k2x2, k2x2),
            flatten(),
            dense(32, relu),
            dense(1, Activation::sigmoid),
        },
        img_size, 1);
}

Network build_alexnet(std::size_t img_size) {
    if (img_size < 67) {
        throw ConfigError("alexnet needs img_size >= 67 for the 11x11/4 stem and three 3x3/2 pools, got " +
                          std::to_string(img_size));
    }
    const auto relu = Activation::relu;
    return finish(
        {
            conv2d(96, {11, 11}, relu, Padding::valid, {4, 4}),
            max_pool(k3x3, k2x2),
            conv2d(256, {5, 5}, relu),
            max_pool(k3x3, k2x2),
            conv2d(384, k3x3, relu),
            conv2d(384, k3x3, relu),
            conv2d(256, k3x3, relu),
            max_pool(k3x3, k2x2),
            flatten(),
            dense(4096, relu),
            dense(4096, relu),
            dense(1, Activation::sigmoid),
        },
        img_size, 3);
}

Network build_inception_v4(std::size_t img_size) {
    if (img_size < 8) throw ConfigError("inception-v4 needs img_size >= 8, got " + std::to_string(img_size));
    const auto relu = Activation::relu;
    constexpr std::array<std::size_t, 7> block1{64, 96, 128, 16, 32, 32, 32};
    constexpr std::array<std::size_t, 7> block2{128, 128, 192, 32, 96, 64, 64};
    LayerSpec first = inception_block(block1);
    first.name = "inception_block_1";
    LayerSpec second = inception_block(block2);
    second.name = "inception_block_2";
    return finish(
        {
            conv2d(32, k3x3, relu),
            conv2d(32, k3x3, relu),
            conv2d(64, k3x3, relu),
            std::move(first),
            std::move(second),
            max_pool(k3x3, k2x2, Padding::same),
            flatten(),
            dense(256, relu),
            dense(1, Activation::sigmoid),
        },
        img_size, 3);
}

Network densenet_mini_base(std::size_t img_size, std::size_t blocks, std::size_t layers_per_block,
                           std::size_t growth) {
    if (blocks == 0 || layers_per_block == 0 || growth == 0) {
        throw ConfigError("densenet-mini needs positive blocks, layers_per_block and growth");
    }
    if (img_size == 0 || blocks > 63 || (img_size >> (blocks - 1)) == 0) {
        throw ConfigError("densenet-mini: img_size " + std::to_string(img_size) + " cannot survive " +
                          std::to_string(blocks - 1) + " transition halvings");
    }
    std::vector<LayerSpec> layers;
    std::size_t channels = 2 * growth;
    layers.push_back(conv2d(channels, k3x3, Activation::none));
    for (std::size_t b = 0; b < blocks; ++b) {
        for (std::size_t l = 0; l < layers_per_block; ++l) {
            LayerSpec composite = layer::branch({
                {},
                {layer::batch_norm(), layer::activation(Activation::relu), conv2d(growth, k3x3, Activation::none)},
            });
            composite.name = "dense_block" + std::to_string(b + 1) + "_layer" + std::to_string(l + 1);
            layers.push_back(std::move(composite));
            channels += growth;
        }
        if (b + 1 < blocks) {
            channels /= 2;
            layers.push_back(layer::batch_norm());
            layers.push_back(conv2d(channels, k1x1, Activation::none));
            layers.push_back(avg_pool(k2x2, k2x2));
        }
    }
    return finish(std::move(layers), img_size, 3);
}

Network build_densenet_mini(std::size_t img_size, std::size_t blocks, std::size_t layers_per_block,
                            std::size_t growth) {
    return attach_head(densenet_mini_base(img_size, blocks, layers_per_block, growth), HeadPool::global_avg, {},
                       std::nullopt, false);
}

Network vgg_mini_base(std::size_t img_size, std::span<const std::size_t> stage_filters) {
    if (stage_filters.empty()) throw ConfigError("vgg-mini needs at least one stage");
    if (stage_filters.size() > 63 || (img_size >> stage_filters.size()) == 0) {
        throw ConfigError("vgg-mini: img_size " + std::to_string(img_size) + " cannot survive " +
                          std::to_string(stage_filters.size()) + " 2x2 pools");
    }
    std::vector<LayerSpec> layers;
    for (std::size_t filters : stage_filters) {
        if (filters == 0) throw ConfigError("vgg-mini stage filter counts must be positive");
        layers.push_back(conv2d(filters, k3x3, Activation::relu));
        layers.push_back(conv2d(filters, k3x3, Activation::relu));
        layers.push_back(max_pool(k2x2, k2x2));
    }
    return finish(std::move(layers), img_size, 3);
}

Network build_vgg_mini(std::size_t img_size, std::span<const std::size_t> stage_filters,
                       std::span<const std::size_t> head_units) {
    return attach_head(vgg_mini_base(img_size, stage_filters), HeadPool::flatten, head_units, std::nullopt, false);
}

Network attach_head(Network base, HeadPool pool, std::span<const std::size_t> head_units,
                    std::optional<float> dropout_rate, bool freeze_base) {
    if (base.layers.empty()) throw ConfigError("attach_head: empty base network");
    if (ends_in_dense(base)) throw ConfigError("attach_head: base already ends in a Dense layer");
    const auto trace = shape_trace(base);
    if (trace.back().shape.size() != 3) {
        throw ConfigError("attach_head: base must end in a spatial tensor, got " +
                          shape_to_string(trace.back().shape));
    }
    const std::size_t base_layers = base.layers.size();
    base.layers.push_back(pool == HeadPool::flatten ? flatten() : layer::global_avg_pool());
    for (std::size_t i = 0; i < head_units.size(); ++i) {
        if (head_units[i] == 0) throw ConfigError("attach_head: head units must be positive");
        base.layers.push_back(dense(head_units[i], Activation::relu));
        if (i == 0 && dropout_rate) base.layers.push_back(layer::dropout(*dropout_rate));
    }
    base.layers.push_back(dense(1, Activation::sigmoid));
    assign_names(base.layers);
    for (const auto& spec : base.layers) validate(spec);
    if (freeze_base) base.freeze(base_layers);
    shape_trace(base);
    return base;
}

}  // namespace mgcn
