#pragma once

#include <cstdint>
#include <vector>

#include "inpaint/nn.hpp"
#include "inpaint/tensor.hpp"

namespace inpaint {

/// H x W grid, 1 = masked (to be filled), 0 = known.
struct BinaryMask {
    std::int64_t h = 0;
    std::int64_t w = 0;
    std::vector<std::uint8_t> bits;

    BinaryMask() = default;
    BinaryMask(std::int64_t h_, std::int64_t w_) : h(h_), w(w_), bits(static_cast<std::size_t>(h_ * w_), 0) {}
    /// Accepts [H,W], [1,H,W] or [1,1,H,W]; values >= 0.5 count as masked.
    static BinaryMask from_tensor(const Tensor& t);
    Tensor to_tensor(DType dt = DType::f32) const;  // [1,1,H,W]
    std::uint8_t operator()(std::int64_t y, std::int64_t x) const { return bits[y * w + x]; }
    std::uint8_t& operator()(std::int64_t y, std::int64_t x) { return bits[y * w + x]; }
    std::int64_t masked_count() const;
};

struct MPEConfig {
    int d_max = 128;
    int d = 64;
};

/// Chebyshev steps to the nearest known pixel. When no pixel is known at all,
/// every entry is 0 and `degenerate` is set; the encoder then uses D_max.
struct DistanceMap {
    std::int64_t h = 0;
    std::int64_t w = 0;
    std::vector<std::int32_t> dist;
    bool degenerate = false;

    Tensor to_tensor(DType dt = DType::f32) const;  // [1,1,H,W]
};

/// Per pixel 4 bits ordered up, down, left, right (dir[(y*w+x)*4+k]).
struct DirectionMap {
    std::int64_t h = 0;
    std::int64_t w = 0;
    std::vector<std::uint8_t> bits;

    enum : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };
    Tensor to_tensor(DType dt = DType::f32) const;  // [1,4,H,W]
};

/// Channel-first maps [1,d,H,W].
struct MPEOutput {
    Tensor p_dis;
    Tensor p_dir;
    Tensor p;
};

DistanceMap masking_distance(const BinaryMask& mask);
DirectionMap masking_direction(const BinaryMask& mask);

/// Channel 2i = sin(clip(D,0,D_max) / 10000^(i/d)), channel 2i+1 = cos of the same.
Tensor sinusoidal_encode(const DistanceMap& dist, const MPEConfig& cfg, DType dt = DType::f32);

/// P_dir[p] = sum_k dir[p,k] * W_dir[k]; W_dir is [4,d]. Differentiable in W_dir.
Tensor embed_direction(const DirectionMap& dir, const Tensor& w_dir);

MPEOutput resize_mpe(const MPEOutput& p, std::int64_t out_h, std::int64_t out_w);

/// Learnable direction table plus the full encoder.
struct MPE {
    MPEConfig cfg;
    Tensor w_dir;  // [4,d]

    MPE() = default;
    MPE(MPEConfig cfg, Rng& rng, DType dt);
    MPEOutput operator()(const BinaryMask& mask) const;
    void collect(ParamSet& ps, const std::string& prefix) const;
};

}  // namespace inpaint
