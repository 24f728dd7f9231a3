#include "inpaint/fft.hpp"

#include <cmath>
#include <numbers>

namespace inpaint {

namespace fft {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

namespace {

void radix2(cd* a, std::size_t n, bool inverse) {
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
        const std::size_t half = len / 2;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < half; ++k) {
                // Twiddles are evaluated directly rather than by recurrence to keep
                // float64 round trips near machine precision.
                cd wk(std::cos(ang * static_cast<double>(k)), std::sin(ang * static_cast<double>(k)));
                cd u = a[i + k];
                cd v = a[i + k + half] * wk;
                a[i + k] = u + v;
                a[i + k + half] = u - v;
            }
        }
    }
}

void direct(cd* a, std::size_t n, bool inverse) {
    std::vector<cd> out(n);
    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t k = 0; k < n; ++k) {
        cd acc = 0;
        for (std::size_t t = 0; t < n; ++t) {
            double ang = sign * 2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
            acc += a[t] * cd(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    for (std::size_t k = 0; k < n; ++k) a[k] = out[k];
}

}  // namespace

void transform_1d(cd* data, std::size_t n, std::size_t stride, bool inverse) {
    if (n <= 1) return;
    std::vector<cd> line(n);
    for (std::size_t i = 0; i < n; ++i) line[i] = data[i * stride];
    if (is_pow2(n))
        radix2(line.data(), n, inverse);
    else
        direct(line.data(), n, inverse);
    for (std::size_t i = 0; i < n; ++i) data[i * stride] = line[i];
}

void transform_2d(cd* plane, std::size_t h, std::size_t w, bool inverse) {
    for (std::size_t r = 0; r < h; ++r) transform_1d(plane + r * w, w, 1, inverse);
    for (std::size_t c = 0; c < w; ++c) transform_1d(plane + c, h, w, inverse);
}

}  // namespace fft

namespace {

ComplexPlanes run(const Tensor& re, const Tensor* im, bool inverse) {
    if (re.rank() < 2) throw DimensionError("fft2 needs rank >= 2, got " + shape_str(re.shape()));
    if (im && (im->shape() != re.shape() || im->dtype() != re.dtype()))
        throw DimensionError("fft2 real/imag planes differ: " + shape_str(re.shape()) + " vs " + shape_str(im->shape()));
    const auto h = static_cast<std::size_t>(re.size(-2));
    const auto w = static_cast<std::size_t>(re.size(-1));
    const auto planes = static_cast<std::size_t>(re.numel()) / (h * w);
    ComplexPlanes out{Tensor::zeros(re.shape(), re.dtype()), Tensor::zeros(re.shape(), re.dtype())};
    dispatch(re.dtype(), [&]<typename T>() {
        auto rin = re.data<T>();
        std::span<const T> iin;
        if (im) iin = im->data<T>();
        auto rout = out.re.mutable_data<T>();
        auto iout = out.im.mutable_data<T>();
        std::vector<fft::cd> buf(h * w);
        const double scale = inverse ? 1.0 / static_cast<double>(h * w) : 1.0;
        for (std::size_t p = 0; p < planes; ++p) {
            const std::size_t off = p * h * w;
            for (std::size_t i = 0; i < h * w; ++i)
                buf[i] = fft::cd(static_cast<double>(rin[off + i]), im ? static_cast<double>(iin[off + i]) : 0.0);
            fft::transform_2d(buf.data(), h, w, inverse);
            for (std::size_t i = 0; i < h * w; ++i) {
                rout[off + i] = static_cast<T>(buf[i].real() * scale);
                iout[off + i] = static_cast<T>(buf[i].imag() * scale);
            }
        }
    });
    return out;
}

}  // namespace

ComplexPlanes fft2(const Tensor& x) { return run(x, nullptr, false); }
ComplexPlanes fft2(const Tensor& re, const Tensor& im) { return run(re, &im, false); }
ComplexPlanes ifft2(const Tensor& re, const Tensor& im) { return run(re, &im, true); }

}  // namespace inpaint
