#include <cmath>

#include "ops_common.hpp"

namespace inpaint {

using detail::AxisSplit;
using detail::norm_axis;
using detail::split_at;

Tensor softmax(const Tensor& x, int axis) {
    const int a = norm_axis(axis, x.rank(), "softmax");
    AxisSplit sp = split_at(x.shape(), a);
    Tensor out(x.shape(), x.dtype());
    dispatch(x.dtype(), [&]<typename T>() {
        auto px = x.data<T>();
        auto po = out.mutable_data<T>();
        for (std::int64_t o = 0; o < sp.outer; ++o)
            for (std::int64_t i = 0; i < sp.inner; ++i) {
                const std::int64_t base = o * sp.extent * sp.inner + i;
                T mx = px[base];
                for (std::int64_t e = 1; e < sp.extent; ++e) mx = std::max(mx, px[base + e * sp.inner]);
                T z = 0;
                for (std::int64_t e = 0; e < sp.extent; ++e) {
                    T v = std::exp(px[base + e * sp.inner] - mx);
                    po[base + e * sp.inner] = v;
                    z += v;
                }
                for (std::int64_t e = 0; e < sp.extent; ++e) po[base + e * sp.inner] /= z;
            }
    });
    if (autograd::needs_graph({&x})) {
        Tensor y = out.detach();
        autograd::record(out, {x}, [y, sp](const Tensor& g) {
            Tensor gx(y.shape(), y.dtype());
            dispatch(y.dtype(), [&]<typename T>() {
                auto py = y.data<T>();
                auto pg = g.data<T>();
                auto po = gx.mutable_data<T>();
                for (std::int64_t o = 0; o < sp.outer; ++o)
                    for (std::int64_t i = 0; i < sp.inner; ++i) {
                        const std::int64_t base = o * sp.extent * sp.inner + i;
                        T dot = 0;
                        for (std::int64_t e = 0; e < sp.extent; ++e) dot += pg[base + e * sp.inner] * py[base + e * sp.inner];
                        for (std::int64_t e = 0; e < sp.extent; ++e) {
                            const auto k = base + e * sp.inner;
                            po[k] = py[k] * (pg[k] - dot);
                        }
                    }
            });
            return std::vector<Tensor>{gx};
        }, "softmax");
    }
    return out;
}

Tensor log_softmax(const Tensor& x, int axis) {
    const int a = norm_axis(axis, x.rank(), "log_softmax");
    AxisSplit sp = split_at(x.shape(), a);
    Tensor out(x.shape(), x.dtype());
    dispatch(x.dtype(), [&]<typename T>() {
        auto px = x.data<T>();
        auto po = out.mutable_data<T>();
        for (std::int64_t o = 0; o < sp.outer; ++o)
            for (std::int64_t i = 0; i < sp.inner; ++i) {
                const std::int64_t base = o * sp.extent * sp.inner + i;
                T mx = px[base];
                for (std::int64_t e = 1; e < sp.extent; ++e) mx = std::max(mx, px[base + e * sp.inner]);
                T z = 0;
                for (std::int64_t e = 0; e < sp.extent; ++e) z += std::exp(px[base + e * sp.inner] - mx);
                const T lz = mx + std::log(z);
                for (std::int64_t e = 0; e < sp.extent; ++e) po[base + e * sp.inner] = px[base + e * sp.inner] - lz;
            }
    });
    if (autograd::needs_graph({&x})) {
        Tensor y = out.detach();
        autograd::record(out, {x}, [y, sp](const Tensor& g) {
            Tensor gx(y.shape(), y.dtype());
            dispatch(y.dtype(), [&]<typename T>() {
                auto py = y.data<T>();
                auto pg = g.data<T>();
                auto po = gx.mutable_data<T>();
                for (std::int64_t o = 0; o < sp.outer; ++o)
                    for (std::int64_t i = 0; i < sp.inner; ++i) {
                        const std::int64_t base = o * sp.extent * sp.inner + i;
                        T gs = 0;
                        for (std::int64_t e = 0; e < sp.extent; ++e) gs += pg[base + e * sp.inner];
                        for (std::int64_t e = 0; e < sp.extent; ++e) {
                            const auto k = base + e * sp.inner;
                            po[k] = pg[k] - std::exp(py[k]) * gs;
                        }
                    }
            });
            return std::vector<Tensor>{gx};
        }, "log_softmax");
    }
    return out;
}

namespace {

// Normalization over groups: element e of group q lives at index
// (o * extent + e) * inner + i for the layouts used here.
template <typename T, typename IdxF, typename ScaleF>
void group_norm_backward(const T* g, const T* xhat, const T* inv_std, std::int64_t groups, std::int64_t count, IdxF idx, ScaleF scale, T* gx) {
    for (std::int64_t q = 0; q < groups; ++q) {
        T m1 = 0, m2 = 0;
        for (std::int64_t e = 0; e < count; ++e) {
            auto k = idx(q, e);
            T gh = g[k] * scale(q, k);
            m1 += gh;
            m2 += gh * xhat[k];
        }
        m1 /= static_cast<T>(count);
        m2 /= static_cast<T>(count);
        for (std::int64_t e = 0; e < count; ++e) {
            auto k = idx(q, e);
            T gh = g[k] * scale(q, k);
            gx[k] = inv_std[q] * (gh - m1 - xhat[k] * m2);
        }
    }
}

}  // namespace

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const std::int64_t c = x.size(-1);
    const std::int64_t rows = x.numel() / c;
    if (gamma.defined() && (gamma.numel() != c || gamma.dtype() != x.dtype()))
        throw DimensionError("layer_norm gamma " + shape_str(gamma.shape()) + " does not match " + shape_str(x.shape()));
    if (beta.defined() && (beta.numel() != c || beta.dtype() != x.dtype()))
        throw DimensionError("layer_norm beta " + shape_str(beta.shape()) + " does not match " + shape_str(x.shape()));
    Tensor out(x.shape(), x.dtype());
    Tensor xhat(x.shape(), x.dtype());
    Tensor inv_std({rows}, x.dtype());
    dispatch(x.dtype(), [&]<typename T>() {
        auto px = x.data<T>();
        auto ph = xhat.mutable_data<T>();
        auto ps = inv_std.mutable_data<T>();
        auto po = out.mutable_data<T>();
        for (std::int64_t r = 0; r < rows; ++r) {
            const T* row = px.data() + r * c;
            T m = 0;
            for (std::int64_t j = 0; j < c; ++j) m += row[j];
            m /= static_cast<T>(c);
            T v = 0;
            for (std::int64_t j = 0; j < c; ++j) v += (row[j] - m) * (row[j] - m);
            v /= static_cast<T>(c);
            const T is = T(1) / std::sqrt(v + static_cast<T>(eps));
            ps[r] = is;
            for (std::int64_t j = 0; j < c; ++j) {
                T h = (row[j] - m) * is;
                ph[r * c + j] = h;
                T y = h;
                if (gamma.defined()) y *= gamma.data<T>()[j];
                if (beta.defined()) y += beta.data<T>()[j];
                po[r * c + j] = y;
            }
        }
    });
    if (autograd::needs_graph({&x, &gamma, &beta})) {
        Tensor gd = gamma.defined() ? gamma.detach() : Tensor();
        bool has_beta = beta.defined();
        Shape beta_shape = has_beta ? beta.shape() : Shape{};
        autograd::record(out, {x, gamma, beta}, [xhat, inv_std, gd, has_beta, beta_shape, rows, c](const Tensor& g) {
            std::vector<Tensor> r(3);
            r[0] = Tensor(xhat.shape(), g.dtype());
            dispatch(g.dtype(), [&]<typename T>() {
                auto pg = g.data<T>();
                auto ph = xhat.data<T>();
                const T* gam = gd.defined() ? gd.data<T>().data() : nullptr;
                group_norm_backward<T>(
                    pg.data(), ph.data(), inv_std.data<T>().data(), rows, c, [c](std::int64_t q, std::int64_t e) { return q * c + e; },
                    [gam, c](std::int64_t, std::int64_t k) { return gam ? gam[k % c] : T(1); }, r[0].mutable_data<T>().data());
                if (gd.defined()) {
                    r[1] = Tensor::zeros(gd.shape(), g.dtype());
                    auto pgam = r[1].mutable_data<T>();
                    for (std::int64_t q = 0; q < rows; ++q)
                        for (std::int64_t j = 0; j < c; ++j) pgam[j] += pg[q * c + j] * ph[q * c + j];
                }
                if (has_beta) {
                    r[2] = Tensor::zeros(beta_shape, g.dtype());
                    auto pb = r[2].mutable_data<T>();
                    for (std::int64_t q = 0; q < rows; ++q)
                        for (std::int64_t j = 0; j < c; ++j) pb[j] += pg[q * c + j];
                }
            });
            return r;
        }, "layer_norm");
    }
    return out;
}

Tensor batch_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state, bool training) {
    if (x.rank() != 4) throw DimensionError("batch_norm2d expects [N,C,H,W], got " + shape_str(x.shape()));
    const std::int64_t N = x.size(0), C = x.size(1), HW = x.size(2) * x.size(3);
    for (const Tensor* t : std::initializer_list<const Tensor*>{&gamma, &beta, &state.running_mean, &state.running_var})
        if (t->defined() && (t->numel() != C || t->dtype() != x.dtype()))
            throw DimensionError("batch_norm2d parameter " + shape_str(t->shape()) + " does not match " + shape_str(x.shape()));
    const std::int64_t count = N * HW;
    Tensor out(x.shape(), x.dtype());
    Tensor xhat(x.shape(), x.dtype());
    Tensor inv_std({C}, x.dtype());
    dispatch(x.dtype(), [&]<typename T>() {
        auto px = x.data<T>();
        auto ph = xhat.mutable_data<T>();
        auto ps = inv_std.mutable_data<T>();
        auto po = out.mutable_data<T>();
        for (std::int64_t c = 0; c < C; ++c) {
            T m, v;
            if (training) {
                T acc = 0;
                for (std::int64_t n = 0; n < N; ++n)
                    for (std::int64_t p = 0; p < HW; ++p) acc += px[(n * C + c) * HW + p];
                m = acc / static_cast<T>(count);
                T sq = 0;
                for (std::int64_t n = 0; n < N; ++n)
                    for (std::int64_t p = 0; p < HW; ++p) {
                        T d = px[(n * C + c) * HW + p] - m;
                        sq += d * d;
                    }
                v = sq / static_cast<T>(count);
                if (state.running_mean.defined()) {
                    auto rm = state.running_mean.mutable_data<T>();
                    auto rv = state.running_var.mutable_data<T>();
                    const T mom = static_cast<T>(state.momentum);
                    const T unbiased = count > 1 ? sq / static_cast<T>(count - 1) : v;
                    rm[c] = (T(1) - mom) * rm[c] + mom * m;
                    rv[c] = (T(1) - mom) * rv[c] + mom * unbiased;
                }
            } else {
                m = state.running_mean.data<T>()[c];
                v = state.running_var.data<T>()[c];
            }
            const T is = T(1) / std::sqrt(v + static_cast<T>(state.eps));
            ps[c] = is;
            const T gm = gamma.defined() ? gamma.data<T>()[c] : T(1);
            const T bt = beta.defined() ? beta.data<T>()[c] : T(0);
            for (std::int64_t n = 0; n < N; ++n)
                for (std::int64_t p = 0; p < HW; ++p) {
                    const auto k = (n * C + c) * HW + p;
                    ph[k] = (px[k] - m) * is;
                    po[k] = ph[k] * gm + bt;
                }
        }
    });
    if (autograd::needs_graph({&x, &gamma, &beta})) {
        Tensor gd = gamma.defined() ? gamma.detach() : Tensor();
        bool has_beta = beta.defined();
        autograd::record(out, {x, gamma, beta}, [xhat, inv_std, gd, has_beta, training, N, C, HW](const Tensor& g) {
            std::vector<Tensor> r(3);
            r[0] = Tensor(xhat.shape(), g.dtype());
            dispatch(g.dtype(), [&]<typename T>() {
                auto pg = g.data<T>();
                auto ph = xhat.data<T>();
                auto pis = inv_std.data<T>();
                auto pgx = r[0].mutable_data<T>();
                const T* gam = gd.defined() ? gd.data<T>().data() : nullptr;
                if (training) {
                    group_norm_backward<T>(
                        pg.data(), ph.data(), pis.data(), C, N * HW,
                        [C, HW](std::int64_t c, std::int64_t e) { return ((e / HW) * C + c) * HW + e % HW; },
                        [gam](std::int64_t c, std::int64_t) { return gam ? gam[c] : T(1); }, pgx.data());
                } else {
                    for (std::int64_t n = 0; n < N; ++n)
                        for (std::int64_t c = 0; c < C; ++c)
                            for (std::int64_t p = 0; p < HW; ++p) {
                                const auto k = (n * C + c) * HW + p;
                                pgx[k] = pg[k] * (gam ? gam[c] : T(1)) * pis[c];
                            }
                }
                if (gd.defined()) {
                    r[1] = Tensor::zeros(gd.shape(), g.dtype());
                    auto pgam = r[1].mutable_data<T>();
                    for (std::int64_t n = 0; n < N; ++n)
                        for (std::int64_t c = 0; c < C; ++c)
                            for (std::int64_t p = 0; p < HW; ++p) pgam[c] += pg[(n * C + c) * HW + p] * ph[(n * C + c) * HW + p];
                }
                if (has_beta) {
                    r[2] = Tensor::zeros({C}, g.dtype());
                    auto pb = r[2].mutable_data<T>();
                    for (std::int64_t n = 0; n < N; ++n)
                        for (std::int64_t c = 0; c < C; ++c)
                            for (std::int64_t p = 0; p < HW; ++p) pb[c] += pg[(n * C + c) * HW + p];
                }
            });
            return r;
        }, "batch_norm2d");
    }
    return out;
}

}  // namespace inpaint
