#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "mgcn/network.hpp"

namespace mgcn {

inline constexpr char kCheckpointMagic[4] = {'M', 'G', 'C', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// JSON description of input shape, frozen prefix and the layer tree.
std::string architecture_descriptor(const Network& net);

/// Rebuilds an uninitialized network from architecture_descriptor() output.
Network network_from_descriptor(const std::string& descriptor);

/// Layout (all integers u32 little-endian):
///   "MGCN" version descriptor_len descriptor tensor_count
///   per tensor: name_len name rank dims... f32 values...
/// Parameters and batch-norm buffers are both written, in named_tensors() order.
void save_checkpoint(const Network& net, const std::filesystem::path& path);

/// Throws FormatError on a bad header, version or truncation and ShapeError,
/// naming the layer, when stored tensors disagree with the architecture.
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace mgcn
