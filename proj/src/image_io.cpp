#include "mrp/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "mrp/error.hpp"

namespace mrp {

namespace {

struct PngImage {
    png_image image;
    PngImage() {
        std::memset(&image, 0, sizeof(image));
        image.version = PNG_IMAGE_VERSION;
    }
    ~PngImage() { png_image_free(&image); }
    PngImage(const PngImage&) = delete;
    PngImage& operator=(const PngImage&) = delete;
};

}  // namespace

ImageSize png_size(const std::filesystem::path& path) {
    PngImage png;
    if (!png_image_begin_read_from_file(&png.image, path.c_str())) {
        throw InputError("cannot decode " + path.string() + ": " + png.image.message);
    }
    return {png.image.height, png.image.width};
}

Tensor3 read_png(const std::filesystem::path& path) {
    PngImage png;
    if (!png_image_begin_read_from_file(&png.image, path.c_str())) {
        throw InputError("cannot decode " + path.string() + ": " + png.image.message);
    }
    png.image.format = PNG_FORMAT_RGB;
    const std::size_t h = png.image.height;
    const std::size_t w = png.image.width;
    std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png.image));
    if (!png_image_finish_read(&png.image, nullptr, buffer.data(), 0, nullptr)) {
        throw InputError("cannot decode " + path.string() + ": " + png.image.message);
    }
    Tensor3 out(3, h, w);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                out.at(c, y, x) = static_cast<float>(buffer[(y * w + x) * 3 + c]) / 255.0f;
            }
        }
    }
    return out;
}

void write_png(const std::filesystem::path& path, const Tensor3& image) {
    if (image.channels() != 1 && image.channels() != 3) {
        throw InputError("write_png supports 1 or 3 channels");
    }
    PngImage png;
    png.image.width = static_cast<png_uint_32>(image.width());
    png.image.height = static_cast<png_uint_32>(image.height());
    png.image.format = image.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const std::size_t c_count = image.channels();
    std::vector<png_byte> buffer(image.size());
    for (std::size_t y = 0; y < image.height(); ++y) {
        for (std::size_t x = 0; x < image.width(); ++x) {
            for (std::size_t c = 0; c < c_count; ++c) {
                const float v = std::clamp(image.at(c, y, x), 0.0f, 1.0f);
                buffer[(y * image.width() + x) * c_count + c] =
                    static_cast<png_byte>(std::lround(v * 255.0f));
            }
        }
    }
    if (!png_image_write_to_file(&png.image, path.c_str(), 0, buffer.data(), 0, nullptr)) {
        throw InputError("cannot write " + path.string() + ": " + png.image.message);
    }
}

}  // namespace mrp
