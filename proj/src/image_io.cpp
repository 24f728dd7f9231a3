#include "inpaint/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace inpaint {

Image8 read_png(const std::filesystem::path& path, int channels) {
    if (channels != 1 && channels != 3) throw ContractError("read_png: channels must be 1 or 3");
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str()))
        throw ImageError("cannot read PNG " + path.string() + ": " + image.message);
    image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    Image8 out;
    out.width = static_cast<int>(image.width);
    out.height = static_cast<int>(image.height);
    out.channels = channels;
    out.pixels.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        throw ImageError("cannot decode PNG " + path.string() + ": " + msg);
    }
    return out;
}

void write_png(const std::filesystem::path& path, const Image8& img) {
    if (img.channels != 1 && img.channels != 3) throw ContractError("write_png: channels must be 1 or 3");
    if (img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * img.channels)
        throw ContractError("write_png: pixel buffer size mismatch");
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = img.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.c_str(), 0, img.pixels.data(), 0, nullptr))
        throw ImageError("cannot write PNG " + path.string() + ": " + image.message);
}

Tensor image_to_tensor(const Image8& img, bool range01, DType dt) {
    const std::int64_t c = img.channels, h = img.height, w = img.width;
    Tensor t({1, c, h, w}, dt);
    dispatch(dt, [&]<typename T>() {
        auto d = t.mutable_data<T>();
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t x = 0; x < w; ++x)
                for (std::int64_t k = 0; k < c; ++k) {
                    double v = img.pixels[(y * w + x) * c + k];
                    d[(k * h + y) * w + x] = static_cast<T>(range01 ? v / 255.0 : v / 127.5 - 1.0);
                }
    });
    return t;
}

Image8 tensor_to_image(const Tensor& t, bool range01) {
    std::int64_t c = 1, h = 0, w = 0;
    if (t.rank() == 2) {
        h = t.size(0), w = t.size(1);
    } else if (t.rank() == 3 || (t.rank() == 4 && t.size(0) == 1)) {
        c = t.size(-3), h = t.size(-2), w = t.size(-1);
    } else {
        throw DimensionError("tensor_to_image: unsupported shape " + shape_str(t.shape()));
    }
    if (c != 1 && c != 3) throw DimensionError("tensor_to_image: need 1 or 3 channels, got " + shape_str(t.shape()));
    Image8 img;
    img.width = static_cast<int>(w);
    img.height = static_cast<int>(h);
    img.channels = static_cast<int>(c);
    img.pixels.resize(static_cast<std::size_t>(c * h * w));
    auto v = t.to_vector();
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x)
            for (std::int64_t k = 0; k < c; ++k) {
                double s = v[(k * h + y) * w + x];
                double p = range01 ? s * 255.0 : (s + 1.0) * 127.5;
                img.pixels[(y * w + x) * c + k] = static_cast<std::uint8_t>(std::lround(std::clamp(p, 0.0, 255.0)));
            }
    return img;
}

Tensor read_mask_png(const std::filesystem::path& path, DType dt) {
    Image8 img = read_png(path, 1);
    Tensor m({1, 1, img.height, img.width}, dt);
    dispatch(dt, [&]<typename T>() {
        auto d = m.mutable_data<T>();
        for (std::size_t i = 0; i < img.pixels.size(); ++i) d[i] = img.pixels[i] >= 128 ? T(1) : T(0);
    });
    return m;
}

void write_mask_png(const std::filesystem::path& path, const Tensor& mask) {
    auto v = mask.to_vector();
    for (auto& x : v) x = x >= 0.5 ? 1.0 : 0.0;
    write_png(path, tensor_to_image(Tensor::from_doubles(mask.shape(), v, DType::f64), true));
}

}  // namespace inpaint
