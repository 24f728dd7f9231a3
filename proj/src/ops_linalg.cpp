#include <cblas.h>

#include "ops_common.hpp"

namespace inpaint {

namespace {

void gemm(bool ta, bool tb, int m, int n, int k, float alpha, const float* a, int lda, const float* b, int ldb, float beta, float* c, int ldc) {
    cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void gemm(bool ta, bool tb, int m, int n, int k, double alpha, const double* a, int lda, const double* b, int ldb, double beta, double* c, int ldc) {
    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

struct MatDims {
    std::int64_t batch = 1, m = 0, k = 0, n = 0;
    bool batched = false;
};

MatDims matmul_dims(const Tensor& a, const Tensor& b) {
    MatDims d;
    if (a.rank() == 2 && b.rank() == 2) {
        d.m = a.size(0);
        d.k = a.size(1);
        d.n = b.size(1);
        if (b.size(0) != d.k) throw DimensionError("matmul: inner extents differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
        return d;
    }
    if (a.rank() == 3 && b.rank() == 3) {
        d.batched = true;
        d.batch = a.size(0);
        d.m = a.size(1);
        d.k = a.size(2);
        d.n = b.size(2);
        if (b.size(0) != d.batch || b.size(1) != d.k)
            throw DimensionError("matmul: incompatible batched shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
        return d;
    }
    throw DimensionError("matmul: expected two rank-2 or two rank-3 operands, got " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
}

// c[batch] = op(a[batch]) * op(b[batch]); when ta, a is stored [k,m]; when tb, b is stored [n,k].
template <typename T>
void batched_gemm(std::int64_t batch, bool ta, bool tb, std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c) {
    const int lda = static_cast<int>(ta ? m : k);
    const int ldb = static_cast<int>(tb ? k : n);
    for (std::int64_t i = 0; i < batch; ++i)
        gemm(ta, tb, static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), T(1), a + i * m * k, lda, b + i * k * n, ldb, T(0),
             c + i * m * n, static_cast<int>(n));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    detail::require_same_dtype(a, b, "matmul");
    MatDims d = matmul_dims(a, b);
    Shape oshape = d.batched ? Shape{d.batch, d.m, d.n} : Shape{d.m, d.n};
    Tensor out(oshape, a.dtype());
    dispatch(a.dtype(), [&]<typename T>() {
        batched_gemm<T>(d.batch, false, false, d.m, d.n, d.k, a.data<T>().data(), b.data<T>().data(), out.mutable_data<T>().data());
    });
    if (autograd::needs_graph({&a, &b})) {
        Tensor ad = a.detach(), bd = b.detach();
        bool ga = a.requires_grad(), gb = b.requires_grad();
        autograd::record(out, {a, b}, [ad, bd, d, ga, gb](const Tensor& g) {
            std::vector<Tensor> r(2);
            dispatch(g.dtype(), [&]<typename T>() {
                if (ga) {
                    r[0] = Tensor(ad.shape(), g.dtype());
                    batched_gemm<T>(d.batch, false, true, d.m, d.k, d.n, g.data<T>().data(), bd.data<T>().data(), r[0].mutable_data<T>().data());
                }
                if (gb) {
                    r[1] = Tensor(bd.shape(), g.dtype());
                    batched_gemm<T>(d.batch, true, false, d.k, d.n, d.m, ad.data<T>().data(), g.data<T>().data(), r[1].mutable_data<T>().data());
                }
            });
            return r;
        }, "matmul");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Convolutions (im2col + GEMM).

std::int64_t conv_out_extent(std::int64_t in, std::int64_t kernel, const ConvSpec& s) {
    return (in + 2 * s.padding - s.dilation * (kernel - 1) - 1) / s.stride + 1;
}

std::int64_t tconv_out_extent(std::int64_t in, std::int64_t kernel, const ConvSpec& s, int output_padding) {
    return (in - 1) * s.stride - 2 * s.padding + s.dilation * (kernel - 1) + 1 + output_padding;
}

namespace {

struct ConvGeom {
    std::int64_t C, H, W, kh, kw, Ho, Wo;
    ConvSpec spec;
    std::int64_t rows() const { return C * kh * kw; }
    std::int64_t cols() const { return Ho * Wo; }
};

template <typename T>
void im2col(const T* x, const ConvGeom& g, T* cols) {
    const auto& s = g.spec;
    for (std::int64_t c = 0; c < g.C; ++c)
        for (std::int64_t i = 0; i < g.kh; ++i)
            for (std::int64_t j = 0; j < g.kw; ++j) {
                T* row = cols + ((c * g.kh + i) * g.kw + j) * g.cols();
                for (std::int64_t oh = 0; oh < g.Ho; ++oh) {
                    const std::int64_t ih = oh * s.stride - s.padding + i * s.dilation;
                    T* dst = row + oh * g.Wo;
                    if (ih < 0 || ih >= g.H) {
                        std::fill_n(dst, g.Wo, T(0));
                        continue;
                    }
                    const T* src = x + (c * g.H + ih) * g.W;
                    for (std::int64_t ow = 0; ow < g.Wo; ++ow) {
                        const std::int64_t iw = ow * s.stride - s.padding + j * s.dilation;
                        dst[ow] = (iw >= 0 && iw < g.W) ? src[iw] : T(0);
                    }
                }
            }
}

template <typename T>
void col2im(const T* cols, const ConvGeom& g, T* x) {
    const auto& s = g.spec;
    for (std::int64_t c = 0; c < g.C; ++c)
        for (std::int64_t i = 0; i < g.kh; ++i)
            for (std::int64_t j = 0; j < g.kw; ++j) {
                const T* row = cols + ((c * g.kh + i) * g.kw + j) * g.cols();
                for (std::int64_t oh = 0; oh < g.Ho; ++oh) {
                    const std::int64_t ih = oh * s.stride - s.padding + i * s.dilation;
                    if (ih < 0 || ih >= g.H) continue;
                    T* dst = x + (c * g.H + ih) * g.W;
                    const T* src = row + oh * g.Wo;
                    for (std::int64_t ow = 0; ow < g.Wo; ++ow) {
                        const std::int64_t iw = ow * s.stride - s.padding + j * s.dilation;
                        if (iw >= 0 && iw < g.W) dst[iw] += src[ow];
                    }
                }
            }
}

bool is_pointwise(const ConvGeom& g) {
    return g.kh == 1 && g.kw == 1 && g.spec.stride == 1 && g.spec.padding == 0;
}

void check_spec(const ConvSpec& s) {
    if (s.stride < 1 || s.padding < 0 || s.dilation < 1)
        throw ContractError("conv spec needs stride >= 1, padding >= 0, dilation >= 1");
}

// Forward correlation of one image: out[F, P] = w[F, CKK] * cols[CKK, P].
template <typename T>
void correlate(const T* x, const T* w, std::int64_t F, const ConvGeom& g, std::vector<T>& cols, T* out) {
    const T* colp = x;
    if (!is_pointwise(g)) {
        cols.resize(static_cast<std::size_t>(g.rows() * g.cols()));
        im2col(x, g, cols.data());
        colp = cols.data();
    }
    gemm(false, false, static_cast<int>(F), static_cast<int>(g.cols()), static_cast<int>(g.rows()), T(1), w, static_cast<int>(g.rows()), colp,
         static_cast<int>(g.cols()), T(0), out, static_cast<int>(g.cols()));
}

// Adjoint of correlate with respect to x: x += col2im(w^T * y).
template <typename T>
void correlate_adjoint(const T* y, const T* w, std::int64_t F, const ConvGeom& g, std::vector<T>& cols, T* x) {
    if (is_pointwise(g)) {
        gemm(true, false, static_cast<int>(g.rows()), static_cast<int>(g.cols()), static_cast<int>(F), T(1), w, static_cast<int>(g.rows()), y,
             static_cast<int>(g.cols()), T(1), x, static_cast<int>(g.cols()));
        return;
    }
    cols.resize(static_cast<std::size_t>(g.rows() * g.cols()));
    gemm(true, false, static_cast<int>(g.rows()), static_cast<int>(g.cols()), static_cast<int>(F), T(1), w, static_cast<int>(g.rows()), y,
         static_cast<int>(g.cols()), T(0), cols.data(), static_cast<int>(g.cols()));
    col2im(cols.data(), g, x);
}

// dw[F, CKK] += y[F, P] * cols(x)^T.
template <typename T>
void correlate_weight_grad(const T* x, const T* y, std::int64_t F, const ConvGeom& g, std::vector<T>& cols, T* dw) {
    const T* colp = x;
    if (!is_pointwise(g)) {
        cols.resize(static_cast<std::size_t>(g.rows() * g.cols()));
        im2col(x, g, cols.data());
        colp = cols.data();
    }
    gemm(false, true, static_cast<int>(F), static_cast<int>(g.rows()), static_cast<int>(g.cols()), T(1), y, static_cast<int>(g.cols()), colp,
         static_cast<int>(g.cols()), T(1), dw, static_cast<int>(g.rows()));
}

template <typename T>
void add_bias(T* out, const T* bias, std::int64_t F, std::int64_t P) {
    for (std::int64_t f = 0; f < F; ++f)
        for (std::int64_t p = 0; p < P; ++p) out[f * P + p] += bias[f];
}

template <typename T>
void bias_grad(const T* g, std::int64_t F, std::int64_t P, T* db) {
    for (std::int64_t f = 0; f < F; ++f) {
        T acc = 0;
        for (std::int64_t p = 0; p < P; ++p) acc += g[f * P + p];
        db[f] += acc;
    }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, const ConvSpec& spec) {
    check_spec(spec);
    if (x.rank() != 4 || w.rank() != 4)
        throw DimensionError("conv2d expects x [N,C,H,W] and w [F,C,kh,kw], got " + shape_str(x.shape()) + " and " + shape_str(w.shape()));
    detail::require_same_dtype(x, w, "conv2d");
    const std::int64_t N = x.size(0), F = w.size(0);
    ConvGeom g{x.size(1), x.size(2), x.size(3), w.size(2), w.size(3), 0, 0, spec};
    if (w.size(1) != g.C)
        throw DimensionError("conv2d channel mismatch: input " + shape_str(x.shape()) + " vs weight " + shape_str(w.shape()));
    if (g.H + 2 * spec.padding < spec.dilation * (g.kh - 1) + 1 || g.W + 2 * spec.padding < spec.dilation * (g.kw - 1) + 1)
        throw DimensionError("conv2d kernel " + shape_str(w.shape()) + " larger than padded input " + shape_str(x.shape()));
    if (bias.defined() && (bias.rank() != 1 || bias.size(0) != F))
        throw DimensionError("conv2d bias " + shape_str(bias.shape()) + " does not match " + std::to_string(F) + " filters");
    g.Ho = conv_out_extent(g.H, g.kh, spec);
    g.Wo = conv_out_extent(g.W, g.kw, spec);
    Tensor out({N, F, g.Ho, g.Wo}, x.dtype());
    dispatch(x.dtype(), [&]<typename T>() {
        auto px = x.data<T>();
        auto pw = w.data<T>();
        auto po = out.mutable_data<T>();
        std::vector<T> cols;
        for (std::int64_t n = 0; n < N; ++n) {
            T* on = po.data() + n * F * g.cols();
            correlate(px.data() + n * g.C * g.H * g.W, pw.data(), F, g, cols, on);
            if (bias.defined()) add_bias(on, bias.data<T>().data(), F, g.cols());
        }
    });
    if (autograd::needs_graph({&x, &w, &bias})) {
        Tensor xd = x.detach(), wd = w.detach();
        bool gx = x.requires_grad(), gw = w.requires_grad(), gb = bias.defined() && bias.requires_grad();
        autograd::record(out, {x, w, bias}, [xd, wd, g, N, F, gx, gw, gb](const Tensor& gout) {
            std::vector<Tensor> r(3);
            dispatch(gout.dtype(), [&]<typename T>() {
                auto pg = gout.data<T>();
                std::vector<T> cols;
                if (gx) r[0] = Tensor::zeros(xd.shape(), gout.dtype());
                if (gw) r[1] = Tensor::zeros(wd.shape(), gout.dtype());
                if (gb) r[2] = Tensor::zeros({F}, gout.dtype());
                for (std::int64_t n = 0; n < N; ++n) {
                    const T* gn = pg.data() + n * F * g.cols();
                    if (gx) correlate_adjoint(gn, wd.data<T>().data(), F, g, cols, r[0].mutable_data<T>().data() + n * g.C * g.H * g.W);
                    if (gw) correlate_weight_grad(xd.data<T>().data() + n * g.C * g.H * g.W, gn, F, g, cols, r[1].mutable_data<T>().data());
                    if (gb) bias_grad(gn, F, g.cols(), r[2].mutable_data<T>().data());
                }
            });
            return r;
        }, "conv2d");
    }
    return out;
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& bias, const ConvSpec& spec, int output_padding) {
    check_spec(spec);
    if (x.rank() != 4 || w.rank() != 4)
        throw DimensionError("conv_transpose2d expects x [N,F,H,W] and w [F,C,kh,kw], got " + shape_str(x.shape()) + " and " +
                             shape_str(w.shape()));
    detail::require_same_dtype(x, w, "conv_transpose2d");
    if (output_padding < 0 || (output_padding >= spec.stride && output_padding >= spec.dilation))
        throw ContractError("conv_transpose2d: output_padding must be smaller than stride or dilation");
    const std::int64_t N = x.size(0), F = w.size(0), C = w.size(1);
    if (x.size(1) != F)
        throw DimensionError("conv_transpose2d channel mismatch: input " + shape_str(x.shape()) + " vs weight " + shape_str(w.shape()));
    if (bias.defined() && (bias.rank() != 1 || bias.size(0) != C))
        throw DimensionError("conv_transpose2d bias " + shape_str(bias.shape()) + " does not match " + std::to_string(C) + " outputs");
    const std::int64_t Ho = tconv_out_extent(x.size(2), w.size(2), spec, output_padding);
    const std::int64_t Wo = tconv_out_extent(x.size(3), w.size(3), spec, output_padding);
    if (Ho < 1 || Wo < 1) throw DimensionError("conv_transpose2d: empty output for input " + shape_str(x.shape()));
    // Geometry of the forward correlation that maps the output back onto x.
    ConvGeom g{C, Ho, Wo, w.size(2), w.size(3), x.size(2), x.size(3), spec};
    if (conv_out_extent(Ho, g.kh, spec) != g.Ho || conv_out_extent(Wo, g.kw, spec) != g.Wo)
        throw DimensionError("conv_transpose2d: inconsistent geometry for " + shape_str(x.shape()));
    Tensor out = Tensor::zeros({N, C, Ho, Wo}, x.dtype());
    dispatch(x.dtype(), [&]<typename T>() {
        auto px = x.data<T>();
        auto pw = w.data<T>();
        auto po = out.mutable_data<T>();
        std::vector<T> cols;
        for (std::int64_t n = 0; n < N; ++n) {
            T* on = po.data() + n * C * Ho * Wo;
            correlate_adjoint(px.data() + n * F * g.cols(), pw.data(), F, g, cols, on);
            if (bias.defined()) add_bias(on, bias.data<T>().data(), C, Ho * Wo);
        }
    });
    if (autograd::needs_graph({&x, &w, &bias})) {
        Tensor xd = x.detach(), wd = w.detach();
        bool gx = x.requires_grad(), gw = w.requires_grad(), gb = bias.defined() && bias.requires_grad();
        autograd::record(out, {x, w, bias}, [xd, wd, g, N, F, C, gx, gw, gb](const Tensor& gout) {
            std::vector<Tensor> r(3);
            dispatch(gout.dtype(), [&]<typename T>() {
                auto pg = gout.data<T>();
                std::vector<T> cols;
                if (gx) r[0] = Tensor::zeros(xd.shape(), gout.dtype());
                if (gw) r[1] = Tensor::zeros(wd.shape(), gout.dtype());
                if (gb) r[2] = Tensor::zeros({C}, gout.dtype());
                for (std::int64_t n = 0; n < N; ++n) {
                    const T* gn = pg.data() + n * C * g.H * g.W;
                    if (gx) correlate(gn, wd.data<T>().data(), F, g, cols, r[0].mutable_data<T>().data() + n * F * g.cols());
                    if (gw) correlate_weight_grad(gn, xd.data<T>().data() + n * F * g.cols(), F, g, cols, r[1].mutable_data<T>().data());
                    if (gb) bias_grad(gn, C, g.H * g.W, r[2].mutable_data<T>().data());
                }
            });
            return r;
        }, "conv_transpose2d");
    }
    return out;
}

}  // namespace inpaint
