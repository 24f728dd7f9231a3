#include <cmath>

#include "ops_common.hpp"

namespace inpaint {

namespace detail {

Shape broadcast_shape(const Shape& a, const Shape& b) {
    const std::size_t r = std::max(a.size(), b.size());
    Shape out(r, 1);
    for (std::size_t i = 0; i < r; ++i) {
        std::int64_t ea = i < r - a.size() ? 1 : a[i - (r - a.size())];
        std::int64_t eb = i < r - b.size() ? 1 : b[i - (r - b.size())];
        if (ea != eb && ea != 1 && eb != 1)
            throw DimensionError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
        out[i] = std::max(ea, eb);
    }
    return out;
}

Tensor reduce_to(const Tensor& g, const Shape& target) {
    if (g.shape() == target) return g;
    Tensor out = Tensor::zeros(target, g.dtype());
    auto v = broadcast_view(target, g.shape());
    dispatch(g.dtype(), [&]<typename T>() {
        auto src = g.data<T>();
        auto dst = out.mutable_data<T>();
        std::int64_t li = 0;
        for (std::int64_t i0 = 0; i0 < v.ext[0]; ++i0)
            for (std::int64_t i1 = 0; i1 < v.ext[1]; ++i1)
                for (std::int64_t i2 = 0; i2 < v.ext[2]; ++i2)
                    for (std::int64_t i3 = 0; i3 < v.ext[3]; ++i3) {
                        std::int64_t base = i0 * v.stride[0] + i1 * v.stride[1] + i2 * v.stride[2] + i3 * v.stride[3];
                        for (std::int64_t i4 = 0; i4 < v.ext[4]; ++i4) dst[base + i4 * v.stride[4]] += src[li++];
                    }
    });
    return out;
}

}  // namespace detail

namespace {

using detail::broadcast_view;

template <typename T, typename F>
void broadcast_apply(const Tensor& a, const Tensor& b, Tensor& out, F f) {
    auto pa = a.data<T>();
    auto pb = b.data<T>();
    auto po = out.mutable_data<T>();
    const auto n = static_cast<std::size_t>(out.numel());
    if (a.shape() == b.shape()) {
        for (std::size_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
        return;
    }
    if (b.numel() == 1 && a.numel() == out.numel()) {
        const T s = pb[0];
        for (std::size_t i = 0; i < n; ++i) po[i] = f(pa[i], s);
        return;
    }
    if (a.numel() == 1 && b.numel() == out.numel()) {
        const T s = pa[0];
        for (std::size_t i = 0; i < n; ++i) po[i] = f(s, pb[i]);
        return;
    }
    auto va = broadcast_view(a.shape(), out.shape());
    auto vb = broadcast_view(b.shape(), out.shape());
    std::int64_t li = 0;
    for (std::int64_t i0 = 0; i0 < va.ext[0]; ++i0)
        for (std::int64_t i1 = 0; i1 < va.ext[1]; ++i1)
            for (std::int64_t i2 = 0; i2 < va.ext[2]; ++i2)
                for (std::int64_t i3 = 0; i3 < va.ext[3]; ++i3) {
                    std::int64_t ba = i0 * va.stride[0] + i1 * va.stride[1] + i2 * va.stride[2] + i3 * va.stride[3];
                    std::int64_t bb = i0 * vb.stride[0] + i1 * vb.stride[1] + i2 * vb.stride[2] + i3 * vb.stride[3];
                    for (std::int64_t i4 = 0; i4 < va.ext[4]; ++i4)
                        po[li++] = f(pa[ba + i4 * va.stride[4]], pb[bb + i4 * vb.stride[4]]);
                }
}

enum class BinOp { add, sub, mul, div };

Tensor binary_raw(const Tensor& a, const Tensor& b, BinOp op) {
    detail::require_same_dtype(a, b, "binary op");
    Tensor out(detail::broadcast_shape(a.shape(), b.shape()), a.dtype());
    dispatch(a.dtype(), [&]<typename T>() {
        switch (op) {
            case BinOp::add: broadcast_apply<T>(a, b, out, [](T x, T y) { return x + y; }); break;
            case BinOp::sub: broadcast_apply<T>(a, b, out, [](T x, T y) { return x - y; }); break;
            case BinOp::mul: broadcast_apply<T>(a, b, out, [](T x, T y) { return x * y; }); break;
            case BinOp::div: broadcast_apply<T>(a, b, out, [](T x, T y) { return x / y; }); break;
        }
    });
    return out;
}

template <typename F>
Tensor map_raw(const Tensor& x, F f) {
    Tensor out(x.shape(), x.dtype());
    dispatch(x.dtype(), [&]<typename T>() {
        auto px = x.data<T>();
        auto po = out.mutable_data<T>();
        for (std::size_t i = 0; i < px.size(); ++i) po[i] = static_cast<T>(f(static_cast<double>(px[i])));
    });
    return out;
}

// out[i] = g[i] * d(x[i], y[i]) where d is the local derivative.
template <typename F>
Tensor chain_raw(const Tensor& g, const Tensor& x, const Tensor& y, F d) {
    Tensor out(g.shape(), g.dtype());
    dispatch(g.dtype(), [&]<typename T>() {
        auto pg = g.data<T>();
        auto px = x.data<T>();
        auto py = y.data<T>();
        auto po = out.mutable_data<T>();
        for (std::size_t i = 0; i < pg.size(); ++i) po[i] = pg[i] * static_cast<T>(d(static_cast<double>(px[i]), static_cast<double>(py[i])));
    });
    return out;
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd f, Deriv d, const char* name) {
    Tensor out = map_raw(x, f);
    if (autograd::needs_graph({&x})) {
        Tensor xs = x.detach();
        Tensor ys = out.detach();
        autograd::record(out, {x}, [xs, ys, d](const Tensor& g) { return std::vector<Tensor>{chain_raw(g, xs, ys, d)}; }, name);
    }
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    Tensor out = binary_raw(a, b, BinOp::add);
    if (autograd::needs_graph({&a, &b})) {
        Shape sa = a.shape(), sb = b.shape();
        autograd::record(out, {a, b}, [sa, sb](const Tensor& g) {
            return std::vector<Tensor>{detail::reduce_to(g, sa), detail::reduce_to(g, sb)};
        }, "add");
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    Tensor out = binary_raw(a, b, BinOp::sub);
    if (autograd::needs_graph({&a, &b})) {
        Shape sa = a.shape(), sb = b.shape();
        autograd::record(out, {a, b}, [sa, sb](const Tensor& g) {
            return std::vector<Tensor>{detail::reduce_to(g, sa), detail::reduce_to(neg(g), sb)};
        }, "sub");
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    Tensor out = binary_raw(a, b, BinOp::mul);
    if (autograd::needs_graph({&a, &b})) {
        Tensor ad = a.detach(), bd = b.detach();
        bool ga = a.requires_grad(), gb = b.requires_grad();
        autograd::record(out, {a, b}, [ad, bd, ga, gb](const Tensor& g) {
            std::vector<Tensor> r(2);
            if (ga) r[0] = detail::reduce_to(binary_raw(g, bd, BinOp::mul), ad.shape());
            if (gb) r[1] = detail::reduce_to(binary_raw(g, ad, BinOp::mul), bd.shape());
            return r;
        }, "mul");
    }
    return out;
}

Tensor div(const Tensor& a, const Tensor& b) {
    Tensor out = binary_raw(a, b, BinOp::div);
    if (autograd::needs_graph({&a, &b})) {
        Tensor ad = a.detach(), bd = b.detach();
        bool ga = a.requires_grad(), gb = b.requires_grad();
        autograd::record(out, {a, b}, [ad, bd, ga, gb](const Tensor& g) {
            std::vector<Tensor> r(2);
            if (ga) r[0] = detail::reduce_to(binary_raw(g, bd, BinOp::div), ad.shape());
            if (gb) {
                Tensor t = binary_raw(binary_raw(g, ad, BinOp::mul), binary_raw(bd, bd, BinOp::mul), BinOp::div);
                r[1] = detail::reduce_to(neg(t), bd.shape());
            }
            return r;
        }, "div");
    }
    return out;
}

Tensor add_scalar(const Tensor& a, double s) {
    return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; }, "add_scalar");
}

Tensor mul_scalar(const Tensor& a, double s) {
    return unary(a, [s](double x) { return x * s; }, [s](double, double) { return s; }, "mul_scalar");
}

Tensor neg(const Tensor& a) {
    return unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; }, "neg");
}

Tensor exp(const Tensor& x) {
    return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; }, "exp");
}

Tensor log(const Tensor& x) {
    return unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; }, "log");
}

Tensor square(const Tensor& x) {
    return unary(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; }, "square");
}

Tensor abs(const Tensor& x) {
    return unary(x, [](double v) { return std::abs(v); }, [](double v, double) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }, "abs");
}

Tensor relu(const Tensor& x) {
    return unary(x, [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; }, "relu");
}

Tensor leaky_relu(const Tensor& x, double slope) {
    return unary(x, [slope](double v) { return v > 0 ? v : slope * v; }, [slope](double v, double) { return v > 0 ? 1.0 : slope; }, "leaky_relu");
}

Tensor sigmoid(const Tensor& x) {
    return unary(
        x,
        [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
        [](double, double y) { return y * (1.0 - y); }, "sigmoid");
}

Tensor tanh(const Tensor& x) {
    return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; }, "tanh");
}

Tensor gelu(const Tensor& x) {
    constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
    constexpr double c = 0.044715;
    return unary(
        x, [](double v) { return 0.5 * v * (1.0 + std::tanh(k * (v + c * v * v * v))); },
        [](double v, double) {
            double u = k * (v + c * v * v * v);
            double t = std::tanh(u);
            return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * k * (1.0 + 3.0 * c * v * v);
        },
        "gelu");
}

Tensor clamp(const Tensor& x, double lo, double hi) {
    return unary(x, [lo, hi](double v) { return v < lo ? lo : (v > hi ? hi : v); },
                 [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; }, "clamp");
}

Tensor broadcast_to(const Tensor& x, const Shape& shape) {
    if (detail::broadcast_shape(x.shape(), shape) != shape)
        throw DimensionError("cannot broadcast " + shape_str(x.shape()) + " to " + shape_str(shape));
    if (x.shape() == shape) return x;
    return add(x, Tensor::zeros(shape, x.dtype()));
}

}  // namespace inpaint
