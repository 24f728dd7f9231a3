#include <numeric>

#include "ops_common.hpp"

namespace inpaint {

using detail::AxisSplit;
using detail::norm_axis;
using detail::split_at;

Tensor sum(const Tensor& x) {
    Tensor out = Tensor::zeros({}, x.dtype());
    dispatch(x.dtype(), [&]<typename T>() {
        double acc = 0.0;
        for (T v : x.data<T>()) acc += static_cast<double>(v);
        out.mutable_data<T>()[0] = static_cast<T>(acc);
    });
    if (autograd::needs_graph({&x})) {
        Shape s = x.shape();
        autograd::record(out, {x}, [s](const Tensor& g) {
            return std::vector<Tensor>{Tensor::full(s, g.item(), g.dtype())};
        }, "sum");
    }
    return out;
}

Tensor mean(const Tensor& x) { return mul_scalar(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor sum(const Tensor& x, int axis, bool keepdim) {
    const int a = norm_axis(axis, x.rank(), "sum");
    AxisSplit sp = split_at(x.shape(), a);
    Shape oshape = x.shape();
    if (keepdim)
        oshape[static_cast<std::size_t>(a)] = 1;
    else
        oshape.erase(oshape.begin() + a);
    Tensor out = Tensor::zeros(oshape, x.dtype());
    dispatch(x.dtype(), [&]<typename T>() {
        auto px = x.data<T>();
        auto po = out.mutable_data<T>();
        for (std::int64_t o = 0; o < sp.outer; ++o)
            for (std::int64_t e = 0; e < sp.extent; ++e)
                for (std::int64_t i = 0; i < sp.inner; ++i) po[o * sp.inner + i] += px[(o * sp.extent + e) * sp.inner + i];
    });
    if (autograd::needs_graph({&x})) {
        Shape s = x.shape();
        autograd::record(out, {x}, [s, sp](const Tensor& g) {
            Tensor gx(s, g.dtype());
            dispatch(g.dtype(), [&]<typename T>() {
                auto pg = g.data<T>();
                auto po = gx.mutable_data<T>();
                for (std::int64_t o = 0; o < sp.outer; ++o)
                    for (std::int64_t e = 0; e < sp.extent; ++e)
                        for (std::int64_t i = 0; i < sp.inner; ++i) po[(o * sp.extent + e) * sp.inner + i] = pg[o * sp.inner + i];
            });
            return std::vector<Tensor>{gx};
        }, "sum_axis");
    }
    return out;
}

Tensor mean(const Tensor& x, int axis, bool keepdim) {
    const int a = norm_axis(axis, x.rank(), "mean");
    return mul_scalar(sum(x, a, keepdim), 1.0 / static_cast<double>(x.size(a)));
}

Tensor reshape(const Tensor& x, Shape shape) {
    std::int64_t known = 1;
    int infer = -1;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (shape[i] == -1) {
            if (infer >= 0) throw DimensionError("reshape: more than one -1 in " + shape_str(shape));
            infer = static_cast<int>(i);
        } else {
            known *= shape[i];
        }
    }
    if (infer >= 0 && known > 0) shape[static_cast<std::size_t>(infer)] = x.numel() / known;
    if (shape_numel(shape) != x.numel())
        throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    if (shape.size() > static_cast<std::size_t>(Tensor::kMaxRank)) throw DimensionError("reshape: rank > 5");
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = shape;
    impl->data = x.impl()->data;
    Tensor out(std::move(impl));
    if (autograd::needs_graph({&x})) {
        Shape s = x.shape();
        autograd::record(out, {x}, [s](const Tensor& g) { return std::vector<Tensor>{reshape(g, s)}; }, "reshape");
    }
    return out;
}

Tensor permute(const Tensor& x, const std::vector<int>& axes) {
    const int r = x.rank();
    if (static_cast<int>(axes.size()) != r) throw ContractError("permute: axis list length does not match rank");
    std::vector<int> perm(axes.size());
    std::vector<bool> used(axes.size(), false);
    for (std::size_t i = 0; i < axes.size(); ++i) {
        perm[i] = norm_axis(axes[i], r, "permute");
        if (used[static_cast<std::size_t>(perm[i])]) throw ContractError("permute: repeated axis");
        used[static_cast<std::size_t>(perm[i])] = true;
    }
    Shape oshape(axes.size());
    for (std::size_t i = 0; i < perm.size(); ++i) oshape[i] = x.shape()[static_cast<std::size_t>(perm[i])];
    // Strides of the input, reordered to output axes, padded to rank 5.
    std::array<std::int64_t, 5> istr{};
    {
        std::int64_t acc = 1;
        for (int i = r; i-- > 0;) {
            istr[static_cast<std::size_t>(i)] = acc;
            acc *= x.shape()[static_cast<std::size_t>(i)];
        }
    }
    std::array<std::int64_t, 5> ext{1, 1, 1, 1, 1}, st{0, 0, 0, 0, 0};
    const std::size_t off = 5 - static_cast<std::size_t>(r);
    for (std::size_t i = 0; i < perm.size(); ++i) {
        ext[off + i] = oshape[i];
        st[off + i] = istr[static_cast<std::size_t>(perm[i])];
    }
    Tensor out(oshape, x.dtype());
    dispatch(x.dtype(), [&]<typename T>() {
        auto px = x.data<T>();
        auto po = out.mutable_data<T>();
        std::int64_t li = 0;
        for (std::int64_t i0 = 0; i0 < ext[0]; ++i0)
            for (std::int64_t i1 = 0; i1 < ext[1]; ++i1)
                for (std::int64_t i2 = 0; i2 < ext[2]; ++i2)
                    for (std::int64_t i3 = 0; i3 < ext[3]; ++i3) {
                        std::int64_t b = i0 * st[0] + i1 * st[1] + i2 * st[2] + i3 * st[3];
                        for (std::int64_t i4 = 0; i4 < ext[4]; ++i4) po[li++] = px[b + i4 * st[4]];
                    }
    });
    if (autograd::needs_graph({&x})) {
        std::vector<int> inv(perm.size());
        for (std::size_t i = 0; i < perm.size(); ++i) inv[static_cast<std::size_t>(perm[i])] = static_cast<int>(i);
        autograd::record(out, {x}, [inv](const Tensor& g) { return std::vector<Tensor>{permute(g, inv)}; }, "permute");
    }
    return out;
}

Tensor transpose(const Tensor& x, int a, int b) {
    std::vector<int> axes(static_cast<std::size_t>(x.rank()));
    std::iota(axes.begin(), axes.end(), 0);
    a = norm_axis(a, x.rank(), "transpose");
    b = norm_axis(b, x.rank(), "transpose");
    std::swap(axes[static_cast<std::size_t>(a)], axes[static_cast<std::size_t>(b)]);
    return permute(x, axes);
}

Tensor concat(const std::vector<Tensor>& xs, int axis) {
    if (xs.empty()) throw ContractError("concat: empty input list");
    const int a = norm_axis(axis, xs[0].rank(), "concat");
    Shape oshape = xs[0].shape();
    std::int64_t total = 0;
    for (const auto& t : xs) {
        detail::require_same_dtype(t, xs[0], "concat");
        Shape s = t.shape();
        if (s.size() != oshape.size()) throw DimensionError("concat: rank mismatch " + shape_str(s) + " vs " + shape_str(oshape));
        for (std::size_t i = 0; i < s.size(); ++i)
            if (static_cast<int>(i) != a && s[i] != oshape[i])
                throw DimensionError("concat: shape mismatch " + shape_str(s) + " vs " + shape_str(oshape));
        total += s[static_cast<std::size_t>(a)];
    }
    oshape[static_cast<std::size_t>(a)] = total;
    Tensor out(oshape, xs[0].dtype());
    AxisSplit osp = split_at(oshape, a);
    std::vector<std::int64_t> offsets;
    dispatch(out.dtype(), [&]<typename T>() {
        auto po = out.mutable_data<T>();
        std::int64_t off = 0;
        for (const auto& t : xs) {
            offsets.push_back(off);
            auto px = t.data<T>();
            const std::int64_t e = t.size(a);
            for (std::int64_t o = 0; o < osp.outer; ++o)
                std::copy_n(px.begin() + o * e * osp.inner, e * osp.inner, po.begin() + (o * osp.extent + off) * osp.inner);
            off += e;
        }
    });
    if (autograd::needs_graph(xs)) {
        std::vector<std::int64_t> lens;
        for (const auto& t : xs) lens.push_back(t.size(a));
        autograd::record(out, xs, [a, offsets, lens](const Tensor& g) {
            std::vector<Tensor> r;
            for (std::size_t i = 0; i < lens.size(); ++i) r.push_back(slice(g, a, offsets[i], lens[i]));
            return r;
        }, "concat");
    }
    return out;
}

Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t length) {
    const int a = norm_axis(axis, x.rank(), "slice");
    if (start < 0 || length < 1 || start + length > x.size(a))
        throw DimensionError("slice [" + std::to_string(start) + ", +" + std::to_string(length) + ") out of range for " + shape_str(x.shape()));
    Shape oshape = x.shape();
    oshape[static_cast<std::size_t>(a)] = length;
    AxisSplit sp = split_at(x.shape(), a);
    Tensor out(oshape, x.dtype());
    dispatch(x.dtype(), [&]<typename T>() {
        auto px = x.data<T>();
        auto po = out.mutable_data<T>();
        for (std::int64_t o = 0; o < sp.outer; ++o)
            std::copy_n(px.begin() + (o * sp.extent + start) * sp.inner, length * sp.inner, po.begin() + o * length * sp.inner);
    });
    if (autograd::needs_graph({&x})) {
        Shape s = x.shape();
        autograd::record(out, {x}, [s, a, start, length, sp](const Tensor& g) {
            Tensor gx = Tensor::zeros(s, g.dtype());
            dispatch(g.dtype(), [&]<typename T>() {
                auto pg = g.data<T>();
                auto po = gx.mutable_data<T>();
                for (std::int64_t o = 0; o < sp.outer; ++o)
                    std::copy_n(pg.begin() + o * length * sp.inner, length * sp.inner, po.begin() + (o * sp.extent + start) * sp.inner);
            });
            return std::vector<Tensor>{gx};
        }, "slice");
    }
    return out;
}

}  // namespace inpaint
