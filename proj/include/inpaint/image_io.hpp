#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "inpaint/tensor.hpp"

namespace inpaint {

class ImageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// 8-bit interleaved image, 1 (gray) or 3 (RGB) channels.
struct Image8 {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> pixels;
};

/// Reads any PNG, converting to gray (channels=1) or RGB (channels=3).
Image8 read_png(const std::filesystem::path& path, int channels);
void write_png(const std::filesystem::path& path, const Image8& img);

/// [1,C,H,W] tensor with v/255 (range01) or v/127.5-1.
Tensor image_to_tensor(const Image8& img, bool range01, DType dt = DType::f32);
/// Inverse of image_to_tensor for a [1,C,H,W] or [C,H,W] or [H,W] tensor; values are clamped and rounded.
Image8 tensor_to_image(const Tensor& t, bool range01);

/// Mask PNG: values >= 128 are masked (1). Returns [1,1,H,W].
Tensor read_mask_png(const std::filesystem::path& path, DType dt = DType::f32);
void write_mask_png(const std::filesystem::path& path, const Tensor& mask);

}  // namespace inpaint
