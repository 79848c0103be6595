#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mgcn/network.hpp"

namespace mgcn {

/// Model names accepted by the command-line tool.
inline constexpr std::array<std::string_view, 5> kModelNames = {"cnn", "alexnet", "inception-v4",
                                                                 "densenet-mini", "vgg-mini"};

/// Four parallel paths merged by channel concat:
///   1x1 f0 | 1x1 f1 -> 3x3 f2 | 1x1 f3 -> 3x3 f4 -> 3x3 f5 | avgpool 3x3/1 -> 1x1 f6
/// All convolutions are `same`-padded and ReLU-activated, so the block keeps
/// the spatial size and emits f0 + f2 + f5 + f6 channels.
LayerSpec inception_block(std::span<const std::size_t> filters);

/// Grayscale five-conv network with 2x2 max pools and a 32-unit dense layer.
/// Needs img_size >= 16 so the fourth pool still sees a 2x2 map.
Network build_custom_cnn(std::size_t img_size);

/// Five convolutions (11x11/4 valid stem), 3x3/2 max pools, two 4096-unit
/// dense layers. Needs img_size >= 67.
Network build_alexnet(std::size_t img_size);

/// Three-conv stem, two inception blocks, 3x3/2 same max pool, dense 256.
Network build_inception_v4(std::size_t img_size);

/// Stem conv(2*growth) followed by `blocks` dense blocks of BN -> ReLU ->
/// conv3x3(growth) layers with transitions (BN -> 1x1 conv halving channels
/// -> 2x2 average pool) between blocks. Ends in a spatial tensor.
Network densenet_mini_base(std::size_t img_size, std::size_t blocks, std::size_t layers_per_block,
                           std::size_t growth);

/// densenet_mini_base + global average pool + Dense(1, sigmoid).
Network build_densenet_mini(std::size_t img_size, std::size_t blocks, std::size_t layers_per_block,
                            std::size_t growth);

/// Per stage: two conv3x3 ReLU layers then 2x2/2 max pool. Ends spatially.
Network vgg_mini_base(std::size_t img_size, std::span<const std::size_t> stage_filters);

Network build_vgg_mini(std::size_t img_size, std::span<const std::size_t> stage_filters,
                       std::span<const std::size_t> head_units);

enum class HeadPool { flatten, global_avg };

/// Appends pool -> Dense(u, relu) per unit (Dropout after the first when a
/// rate is given) -> Dense(1, sigmoid). With freeze_base every base layer
/// becomes non-trainable. Existing base parameters are kept.
Network attach_head(Network base, HeadPool pool, std::span<const std::size_t> head_units,
                    std::optional<float> dropout_rate, bool freeze_base);

}  // namespace mgcn
