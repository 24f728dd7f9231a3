#include <cmath>

#include "inpaint/fft.hpp"
#include "ops_common.hpp"

namespace inpaint {

namespace {

struct Planes {
    std::int64_t count, h, w;
};

Planes planes_of(const Tensor& x, const char* op) {
    if (x.rank() < 2) throw DimensionError(std::string(op) + " needs rank >= 2, got " + shape_str(x.shape()));
    return {x.numel() / (x.size(-2) * x.size(-1)), x.size(-2), x.size(-1)};
}

Shape with_hw(Shape s, std::int64_t h, std::int64_t w) {
    s[s.size() - 2] = h;
    s[s.size() - 1] = w;
    return s;
}

// Nearest: each output pixel reads src index floor(dst * in / out).
template <typename T>
void nearest_apply(const T* in, T* out, const Planes& p, std::int64_t oh, std::int64_t ow, bool adjoint) {
    for (std::int64_t q = 0; q < p.count; ++q)
        for (std::int64_t y = 0; y < oh; ++y) {
            const std::int64_t sy = (y * p.h) / oh;
            for (std::int64_t x = 0; x < ow; ++x) {
                const std::int64_t sx = (x * p.w) / ow;
                const auto si = (q * p.h + sy) * p.w + sx;
                const auto di = (q * oh + y) * ow + x;
                if (adjoint)
                    const_cast<T*>(in)[si] += out[di];
                else
                    out[di] = in[si];
            }
        }
}

struct BilinearTap {
    std::int64_t i0, i1;
    double w1;
};

std::vector<BilinearTap> bilinear_taps(std::int64_t in, std::int64_t out) {
    std::vector<BilinearTap> taps(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::int64_t o = 0; o < out; ++o) {
        double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(in - 1));
        auto i0 = static_cast<std::int64_t>(std::floor(src));
        std::int64_t i1 = std::min(i0 + 1, in - 1);
        taps[static_cast<std::size_t>(o)] = {i0, i1, src - static_cast<double>(i0)};
    }
    return taps;
}

}  // namespace

Tensor resize_nearest(const Tensor& x, std::int64_t out_h, std::int64_t out_w) {
    if (out_h < 1 || out_w < 1) throw ContractError("resize_nearest: target extents must be >= 1");
    Planes p = planes_of(x, "resize_nearest");
    if (p.h == out_h && p.w == out_w) return x;
    Tensor out(with_hw(x.shape(), out_h, out_w), x.dtype());
    dispatch(x.dtype(), [&]<typename T>() { nearest_apply(x.data<T>().data(), out.mutable_data<T>().data(), p, out_h, out_w, false); });
    if (autograd::needs_graph({&x})) {
        Shape s = x.shape();
        autograd::record(out, {x}, [s, p, out_h, out_w](const Tensor& g) {
            Tensor gx = Tensor::zeros(s, g.dtype());
            dispatch(g.dtype(), [&]<typename T>() {
                nearest_apply(gx.mutable_data<T>().data(), const_cast<T*>(g.data<T>().data()), p, out_h, out_w, true);
            });
            return std::vector<Tensor>{gx};
        }, "resize_nearest");
    }
    return out;
}

Tensor resize_bilinear(const Tensor& x, std::int64_t out_h, std::int64_t out_w) {
    if (out_h < 1 || out_w < 1) throw ContractError("resize_bilinear: target extents must be >= 1");
    Planes p = planes_of(x, "resize_bilinear");
    if (p.h == out_h && p.w == out_w) return x;
    auto ty = bilinear_taps(p.h, out_h);
    auto tx = bilinear_taps(p.w, out_w);
    Tensor out(with_hw(x.shape(), out_h, out_w), x.dtype());
    dispatch(x.dtype(), [&]<typename T>() {
        auto px = x.data<T>();
        auto po = out.mutable_data<T>();
        for (std::int64_t q = 0; q < p.count; ++q)
            for (std::int64_t y = 0; y < out_h; ++y) {
                const auto& a = ty[static_cast<std::size_t>(y)];
                for (std::int64_t xx = 0; xx < out_w; ++xx) {
                    const auto& b = tx[static_cast<std::size_t>(xx)];
                    const T* base = px.data() + q * p.h * p.w;
                    double v = (1 - a.w1) * ((1 - b.w1) * base[a.i0 * p.w + b.i0] + b.w1 * base[a.i0 * p.w + b.i1]) +
                               a.w1 * ((1 - b.w1) * base[a.i1 * p.w + b.i0] + b.w1 * base[a.i1 * p.w + b.i1]);
                    po[(q * out_h + y) * out_w + xx] = static_cast<T>(v);
                }
            }
    });
    if (autograd::needs_graph({&x})) {
        Shape s = x.shape();
        autograd::record(out, {x}, [s, p, ty, tx, out_h, out_w](const Tensor& g) {
            Tensor gx = Tensor::zeros(s, g.dtype());
            dispatch(g.dtype(), [&]<typename T>() {
                auto pg = g.data<T>();
                auto po = gx.mutable_data<T>();
                for (std::int64_t q = 0; q < p.count; ++q)
                    for (std::int64_t y = 0; y < out_h; ++y) {
                        const auto& a = ty[static_cast<std::size_t>(y)];
                        for (std::int64_t xx = 0; xx < out_w; ++xx) {
                            const auto& b = tx[static_cast<std::size_t>(xx)];
                            T* base = po.data() + q * p.h * p.w;
                            const double gv = pg[(q * out_h + y) * out_w + xx];
                            base[a.i0 * p.w + b.i0] += static_cast<T>(gv * (1 - a.w1) * (1 - b.w1));
                            base[a.i0 * p.w + b.i1] += static_cast<T>(gv * (1 - a.w1) * b.w1);
                            base[a.i1 * p.w + b.i0] += static_cast<T>(gv * a.w1 * (1 - b.w1));
                            base[a.i1 * p.w + b.i1] += static_cast<T>(gv * a.w1 * b.w1);
                        }
                    }
            });
            return std::vector<Tensor>{gx};
        }, "resize_bilinear");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Real 2-D FFT with (re, im) stacked on the channel axis.

namespace {

using fft::cd;

// Half spectrum [N,2C,H,Wf] from real planes [N,C,H,W].
template <typename T>
void rfft_forward(const T* x, T* y, std::int64_t N, std::int64_t C, std::int64_t H, std::int64_t W) {
    const std::int64_t Wf = W / 2 + 1;
    std::vector<cd> buf(static_cast<std::size_t>(H * W));
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t c = 0; c < C; ++c) {
            const T* src = x + (n * C + c) * H * W;
            for (std::int64_t i = 0; i < H * W; ++i) buf[static_cast<std::size_t>(i)] = cd(static_cast<double>(src[i]), 0.0);
            fft::transform_2d(buf.data(), static_cast<std::size_t>(H), static_cast<std::size_t>(W), false);
            T* re = y + ((n * 2 * C) + 2 * c) * H * Wf;
            T* im = re + H * Wf;
            for (std::int64_t r = 0; r < H; ++r)
                for (std::int64_t k = 0; k < Wf; ++k) {
                    const cd v = buf[static_cast<std::size_t>(r * W + k)];
                    re[r * Wf + k] = static_cast<T>(v.real());
                    im[r * Wf + k] = static_cast<T>(v.imag());
                }
        }
}

// x[n] = scale * Re(sum_k Z[k] e^{+i theta}) where Z holds the half spectrum
// (optionally with Hermitian mirror of the interior columns).
template <typename T>
void half_to_real(const T* y, T* x, std::int64_t N, std::int64_t C, std::int64_t H, std::int64_t W, bool mirror, double scale) {
    const std::int64_t Wf = W / 2 + 1;
    std::vector<cd> buf(static_cast<std::size_t>(H * W));
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t c = 0; c < C; ++c) {
            std::fill(buf.begin(), buf.end(), cd(0, 0));
            const T* re = y + ((n * 2 * C) + 2 * c) * H * Wf;
            const T* im = re + H * Wf;
            for (std::int64_t r = 0; r < H; ++r)
                for (std::int64_t k = 0; k < Wf; ++k) {
                    cd v(static_cast<double>(re[r * Wf + k]), static_cast<double>(im[r * Wf + k]));
                    buf[static_cast<std::size_t>(r * W + k)] = v;
                    if (mirror && k > 0 && k < W - k) buf[static_cast<std::size_t>(((H - r) % H) * W + (W - k))] = std::conj(v);
                }
            fft::transform_2d(buf.data(), static_cast<std::size_t>(H), static_cast<std::size_t>(W), true);
            T* dst = x + (n * C + c) * H * W;
            for (std::int64_t i = 0; i < H * W; ++i) dst[i] = static_cast<T>(buf[static_cast<std::size_t>(i)].real() * scale);
        }
}

// Adjoint of half_to_real with mirroring: grad_Y[k] = (c_k / HW) * FFT(g)[k].
template <typename T>
void irfft_adjoint(const T* g, T* gy, std::int64_t N, std::int64_t C, std::int64_t H, std::int64_t W) {
    const std::int64_t Wf = W / 2 + 1;
    rfft_forward(g, gy, N, C, H, W);
    const double inv = 1.0 / static_cast<double>(H * W);
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t c = 0; c < 2 * C; ++c) {
            T* p = gy + (n * 2 * C + c) * H * Wf;
            for (std::int64_t r = 0; r < H; ++r)
                for (std::int64_t k = 0; k < Wf; ++k) {
                    const double ck = (k == 0 || k == W - k) ? 1.0 : 2.0;
                    p[r * Wf + k] = static_cast<T>(static_cast<double>(p[r * Wf + k]) * ck * inv);
                }
        }
}

}  // namespace

Tensor rfft2_stacked(const Tensor& x) {
    if (x.rank() != 4) throw DimensionError("rfft2_stacked expects [N,C,H,W], got " + shape_str(x.shape()));
    const std::int64_t N = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
    if (H % 2 != 0 || W % 2 != 0) throw DimensionError("rfft2_stacked needs even spatial extents, got " + shape_str(x.shape()));
    const std::int64_t Wf = W / 2 + 1;
    Tensor out({N, 2 * C, H, Wf}, x.dtype());
    dispatch(x.dtype(), [&]<typename T>() { rfft_forward(x.data<T>().data(), out.mutable_data<T>().data(), N, C, H, W); });
    if (autograd::needs_graph({&x})) {
        autograd::record(out, {x}, [N, C, H, W](const Tensor& g) {
            Tensor gx({N, C, H, W}, g.dtype());
            dispatch(g.dtype(), [&]<typename T>() { half_to_real(g.data<T>().data(), gx.mutable_data<T>().data(), N, C, H, W, false, 1.0); });
            return std::vector<Tensor>{gx};
        }, "rfft2");
    }
    return out;
}

Tensor irfft2_stacked(const Tensor& y) {
    if (y.rank() != 4 || y.size(1) % 2 != 0)
        throw DimensionError("irfft2_stacked expects [N,2C,H,Wf], got " + shape_str(y.shape()));
    const std::int64_t N = y.size(0), C = y.size(1) / 2, H = y.size(2), Wf = y.size(3);
    const std::int64_t W = 2 * (Wf - 1);
    if (W < 2) throw DimensionError("irfft2_stacked: half-spectrum width must be >= 2, got " + shape_str(y.shape()));
    Tensor out({N, C, H, W}, y.dtype());
    dispatch(y.dtype(), [&]<typename T>() { half_to_real(y.data<T>().data(), out.mutable_data<T>().data(), N, C, H, W, true, 1.0 / static_cast<double>(H * W)); });
    if (autograd::needs_graph({&y})) {
        Shape ys = y.shape();
        autograd::record(out, {y}, [ys, N, C, H, W](const Tensor& g) {
            Tensor gy(ys, g.dtype());
            dispatch(g.dtype(), [&]<typename T>() { irfft_adjoint(g.data<T>().data(), gy.mutable_data<T>().data(), N, C, H, W); });
            return std::vector<Tensor>{gy};
        }, "irfft2");
    }
    return out;
}

}  // namespace inpaint
