#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "inpaint/tensor.hpp"

namespace inpaint {

struct ComplexPlanes {
    Tensor re;
    Tensor im;
};

/// Unnormalized forward 2-D DFT over the last two axes of a real tensor.
ComplexPlanes fft2(const Tensor& x);
/// Unnormalized forward 2-D DFT of a complex tensor given as two planes.
ComplexPlanes fft2(const Tensor& re, const Tensor& im);
/// Inverse 2-D DFT scaled by 1/(H*W).
ComplexPlanes ifft2(const Tensor& re, const Tensor& im);

namespace fft {

using cd = std::complex<double>;

bool is_pow2(std::size_t n);

/// In-place 1-D transform of `n` elements spaced `stride` apart. Radix-2 for
/// powers of two, direct DFT otherwise. No normalization in either direction.
void transform_1d(cd* data, std::size_t n, std::size_t stride, bool inverse);

/// In-place unnormalized 2-D transform of a row-major h x w plane.
void transform_2d(cd* plane, std::size_t h, std::size_t w, bool inverse);

}  // namespace fft

}  // namespace inpaint
