#include "inpaint/mpe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "inpaint/ops.hpp"

namespace inpaint {

namespace {
constexpr std::int32_t kInf = std::numeric_limits<std::int32_t>::max() / 2;
}

BinaryMask BinaryMask::from_tensor(const Tensor& t) {
    bool ok = t.rank() == 2 || (t.rank() == 3 && t.size(0) == 1) || (t.rank() == 4 && t.size(0) == 1 && t.size(1) == 1);
    if (!ok) throw DimensionError("mask must be [H,W], [1,H,W] or [1,1,H,W], got " + shape_str(t.shape()));
    BinaryMask m(t.size(-2), t.size(-1));
    auto v = t.to_vector();
    for (std::size_t i = 0; i < v.size(); ++i) m.bits[i] = v[i] >= 0.5 ? 1 : 0;
    return m;
}

Tensor BinaryMask::to_tensor(DType dt) const {
    std::vector<double> v(bits.begin(), bits.end());
    return Tensor::from_doubles({1, 1, h, w}, v, dt);
}

std::int64_t BinaryMask::masked_count() const {
    return std::count(bits.begin(), bits.end(), std::uint8_t{1});
}

Tensor DistanceMap::to_tensor(DType dt) const {
    std::vector<double> v(dist.begin(), dist.end());
    return Tensor::from_doubles({1, 1, h, w}, v, dt);
}

Tensor DirectionMap::to_tensor(DType dt) const {
    std::vector<double> v(static_cast<std::size_t>(4 * h * w));
    for (std::int64_t p = 0; p < h * w; ++p)
        for (int k = 0; k < 4; ++k) v[k * h * w + p] = bits[p * 4 + k];
    return Tensor::from_doubles({1, 4, h, w}, v, dt);
}

DistanceMap masking_distance(const BinaryMask& mask) {
    const std::int64_t h = mask.h, w = mask.w;
    DistanceMap out;
    out.h = h;
    out.w = w;
    out.dist.assign(static_cast<std::size_t>(h * w), 0);
    auto& d = out.dist;
    for (std::int64_t i = 0; i < h * w; ++i) d[i] = mask.bits[i] ? kInf : 0;

    auto relax = [&](std::int64_t y, std::int64_t x, std::int64_t ny, std::int64_t nx) {
        if (ny < 0 || ny >= h || nx < 0 || nx >= w) return;
        d[y * w + x] = std::min(d[y * w + x], d[ny * w + nx] + 1);
    };
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
            if (!d[y * w + x]) continue;
            relax(y, x, y - 1, x - 1);
            relax(y, x, y - 1, x);
            relax(y, x, y - 1, x + 1);
            relax(y, x, y, x - 1);
        }
    for (std::int64_t y = h - 1; y >= 0; --y)
        for (std::int64_t x = w - 1; x >= 0; --x) {
            if (!d[y * w + x]) continue;
            relax(y, x, y + 1, x + 1);
            relax(y, x, y + 1, x);
            relax(y, x, y + 1, x - 1);
            relax(y, x, y, x + 1);
        }
    if (mask.masked_count() == h * w) {
        std::fill(d.begin(), d.end(), 0);
        out.degenerate = true;
    }
    return out;
}

DirectionMap masking_direction(const BinaryMask& mask) {
    const std::int64_t h = mask.h, w = mask.w;
    DirectionMap out;
    out.h = h;
    out.w = w;
    out.bits.assign(static_cast<std::size_t>(4 * h * w), 0);
    // ray[k][p]: steps along direction k until a known pixel, kInf if the border comes first
    std::vector<std::int32_t> ray[4];
    for (auto& r : ray) r.assign(static_cast<std::size_t>(h * w), kInf);
    auto step = [](std::int32_t prev) { return prev >= kInf ? kInf : prev + 1; };
    for (std::int64_t x = 0; x < w; ++x) {
        std::int32_t up = kInf;
        for (std::int64_t y = 0; y < h; ++y) {
            std::int64_t p = y * w + x;
            up = mask.bits[p] ? step(up) : 0;
            ray[DirectionMap::kUp][p] = up;
        }
        std::int32_t down = kInf;
        for (std::int64_t y = h - 1; y >= 0; --y) {
            std::int64_t p = y * w + x;
            down = mask.bits[p] ? step(down) : 0;
            ray[DirectionMap::kDown][p] = down;
        }
    }
    for (std::int64_t y = 0; y < h; ++y) {
        std::int32_t left = kInf;
        for (std::int64_t x = 0; x < w; ++x) {
            std::int64_t p = y * w + x;
            left = mask.bits[p] ? step(left) : 0;
            ray[DirectionMap::kLeft][p] = left;
        }
        std::int32_t right = kInf;
        for (std::int64_t x = w - 1; x >= 0; --x) {
            std::int64_t p = y * w + x;
            right = mask.bits[p] ? step(right) : 0;
            ray[DirectionMap::kRight][p] = right;
        }
    }
    for (std::int64_t p = 0; p < h * w; ++p) {
        if (!mask.bits[p]) continue;
        std::int32_t best = kInf;
        for (int k = 0; k < 4; ++k) best = std::min(best, ray[k][p]);
        if (best >= kInf) continue;
        for (int k = 0; k < 4; ++k) out.bits[p * 4 + k] = ray[k][p] == best ? 1 : 0;
    }
    return out;
}

Tensor sinusoidal_encode(const DistanceMap& dist, const MPEConfig& cfg, DType dt) {
    if (cfg.d <= 0 || cfg.d % 2) throw ContractError("MPE channel count d must be positive and even");
    if (cfg.d_max < 1) throw ContractError("MPE D_max must be >= 1");
    const std::int64_t hw = dist.h * dist.w;
    Tensor out({1, cfg.d, dist.h, dist.w}, dt);
    dispatch(dt, [&]<typename T>() {
        auto o = out.mutable_data<T>();
        for (int i = 0; i < cfg.d / 2; ++i) {
            const double denom = std::pow(10000.0, static_cast<double>(i) / cfg.d);
            for (std::int64_t p = 0; p < hw; ++p) {
                double dv = dist.degenerate ? cfg.d_max : std::clamp<double>(dist.dist[p], 0.0, cfg.d_max);
                double a = dv / denom;
                o[(2 * i) * hw + p] = static_cast<T>(std::sin(a));
                o[(2 * i + 1) * hw + p] = static_cast<T>(std::cos(a));
            }
        }
    });
    return out;
}

Tensor embed_direction(const DirectionMap& dir, const Tensor& w_dir) {
    if (w_dir.rank() != 2 || w_dir.size(0) != 4)
        throw DimensionError("W_dir must be [4,d], got " + shape_str(w_dir.shape()));
    const std::int64_t hw = dir.h * dir.w;
    std::vector<double> onehot(dir.bits.begin(), dir.bits.end());
    Tensor bits = Tensor::from_doubles({hw, 4}, onehot, w_dir.dtype());
    Tensor rows = matmul(bits, w_dir);  // [hw,d]
    return reshape(transpose(rows, 0, 1), {1, w_dir.size(1), dir.h, dir.w});
}

MPEOutput resize_mpe(const MPEOutput& p, std::int64_t out_h, std::int64_t out_w) {
    if (out_h < 1 || out_w < 1) throw ContractError("resize_mpe: target extents must be >= 1");
    MPEOutput r;
    r.p_dis = resize_nearest(p.p_dis, out_h, out_w);
    r.p_dir = p.p_dir.defined() ? resize_nearest(p.p_dir, out_h, out_w) : Tensor();
    r.p = p.p.defined() ? resize_nearest(p.p, out_h, out_w) : Tensor();
    return r;
}

MPE::MPE(MPEConfig c, Rng& rng, DType dt) : cfg(c) {
    if (cfg.d <= 0 || cfg.d % 2) throw ContractError("MPE channel count d must be positive and even");
    w_dir = rng.normal_tensor({4, cfg.d}, 0.02, dt);
}

MPEOutput MPE::operator()(const BinaryMask& mask) const {
    MPEOutput out;
    out.p_dis = sinusoidal_encode(masking_distance(mask), cfg, w_dir.dtype());
    out.p_dir = embed_direction(masking_direction(mask), w_dir);
    out.p = add(out.p_dis, out.p_dir);
    return out;
}

void MPE::collect(ParamSet& ps, const std::string& prefix) const { ps.add(prefix + ".w_dir", w_dir); }

}  // namespace inpaint
