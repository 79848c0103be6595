#include "mgcn/png_io.hpp"

#include <png.h>

#include <cstring>
#include <string>

#include "mgcn/errors.hpp"

namespace mgcn {

namespace {

struct ImageGuard {
    png_image* image;
    ~ImageGuard() { png_image_free(image); }
};

}  // namespace

Image read_png(const std::filesystem::path& path) {
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    ImageGuard guard{&png};
    if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
        throw DataError("cannot decode PNG " + path.string() + ": " + png.message);
    }
    Image img;
    const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
    png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    img.width = png.width;
    img.height = png.height;
    img.channels = color ? 3 : 1;
    img.pixels.resize(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr)) {
        throw DataError("cannot decode PNG " + path.string() + ": " + png.message);
    }
    if (img.width == 0 || img.height == 0) throw DataError("empty PNG " + path.string());
    return img;
}

void write_png(const std::filesystem::path& path, const Image& image) {
    if (image.channels != 1 && image.channels != 3) throw ConfigError("write_png: channels must be 1 or 3");
    if (image.pixels.size() != image.width * image.height * image.channels) {
        throw ConfigError("write_png: pixel buffer does not match dimensions");
    }
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    ImageGuard guard{&png};
    if (!png_image_write_to_file(&png, path.string().c_str(), 0, image.pixels.data(), 0, nullptr)) {
        throw DataError("cannot write PNG " + path.string() + ": " + png.message);
    }
}

}  // namespace mgcn
