#pragma once

#include <array>
#include <string>

#include "inpaint/autograd.hpp"
#include "inpaint/ops.hpp"

namespace inpaint::detail {

inline void require_same_dtype(const Tensor& a, const Tensor& b, const char* op) {
    if (a.dtype() != b.dtype())
        throw ContractError(std::string(op) + ": dtype mismatch " + dtype_name(a.dtype()) + " vs " + dtype_name(b.dtype()));
}

inline int norm_axis(int axis, int rank, const char* op) {
    int a = axis < 0 ? axis + rank : axis;
    if (a < 0 || a >= rank)
        throw ContractError(std::string(op) + ": axis " + std::to_string(axis) + " invalid for rank " + std::to_string(rank));
    return a;
}

/// Splits a shape around `axis` into (outer, extent, inner).
struct AxisSplit {
    std::int64_t outer = 1, extent = 1, inner = 1;
};

inline AxisSplit split_at(const Shape& s, int axis) {
    AxisSplit r;
    for (int i = 0; i < axis; ++i) r.outer *= s[static_cast<std::size_t>(i)];
    r.extent = s[static_cast<std::size_t>(axis)];
    for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < s.size(); ++i) r.inner *= s[i];
    return r;
}

/// Padded 5-D view used by broadcast loops.
struct Strided5 {
    std::array<std::int64_t, 5> ext{1, 1, 1, 1, 1};
    std::array<std::int64_t, 5> stride{0, 0, 0, 0, 0};
};

inline Strided5 broadcast_view(const Shape& src, const Shape& out) {
    Strided5 v;
    const std::size_t off = 5 - out.size();
    for (std::size_t i = 0; i < out.size(); ++i) v.ext[off + i] = out[i];
    std::array<std::int64_t, 5> sstr{};
    std::int64_t acc = 1;
    for (std::size_t i = src.size(); i-- > 0;) {
        sstr[i] = acc;
        acc *= src[i];
    }
    const std::size_t soff = out.size() - src.size();
    for (std::size_t i = 0; i < src.size(); ++i) v.stride[off + soff + i] = src[i] == 1 ? 0 : sstr[i];
    return v;
}

Shape broadcast_shape(const Shape& a, const Shape& b);

/// Sums `g` (broadcast result) back down to `target` extents.
Tensor reduce_to(const Tensor& g, const Shape& target);

}  // namespace inpaint::detail
