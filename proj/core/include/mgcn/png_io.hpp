#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace mgcn {

/// 8-bit image, interleaved channels (1 = gray, 3 = RGB), row-major.
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
        return pixels[(y * width + x) * channels + c];
    }
};

/// Decodes any PNG to 8-bit gray or RGB (alpha is composited, 16-bit is
/// reduced). Throws DataError naming the path on failure.
Image read_png(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const Image& image);

}  // namespace mgcn
