#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "inpaint/mpe.hpp"
#include "inpaint/nn.hpp"
#include "inpaint/tensor.hpp"

namespace inpaint {

/// rfft2 -> 1x1 conv on stacked (re, im) channels -> BN -> ReLU -> irfft2.
/// With `linear` set, BN and ReLU are skipped and the map is linear in x.
struct SpectralTransform {
    Conv2d conv;  // [2C, 2C, 1, 1], no bias
    BatchNorm2d bn;
    bool linear = false;

    SpectralTransform() = default;
    SpectralTransform(std::int64_t channels, Rng& rng, DType dt);
    Tensor operator()(const Tensor& x, bool training) const;
    void collect(ParamSet& ps, const std::string& prefix) const;
};

/// Global branch: 1x1 conv (C -> C/2) + BN + ReLU, spectral transform, 1x1 conv of (h + spectral(h)) back to C.
struct GlobalBranch {
    Conv2d pre;
    BatchNorm2d pre_bn;
    SpectralTransform spectral;
    Conv2d post;

    GlobalBranch() = default;
    GlobalBranch(std::int64_t in, std::int64_t out, Rng& rng, DType dt);
    Tensor operator()(const Tensor& x, bool training) const;
    void collect(ParamSet& ps, const std::string& prefix) const;
};

/// One FFC layer over a tensor whose first (1-ratio)*C channels are local, the rest global.
struct FFCLayer {
    std::int64_t local = 0, global = 0;
    Conv2d l2l, l2g, g2l;
    GlobalBranch g2g;
    BatchNorm2d bn_l, bn_g;

    FFCLayer() = default;
    FFCLayer(std::int64_t channels, double ratio, Rng& rng, DType dt);
    Tensor operator()(const Tensor& x, bool training) const;
    void collect(ParamSet& ps, const std::string& prefix) const;
};

/// Two FFC layers with a residual around them.
struct FFCBlock {
    FFCLayer a, b;

    FFCBlock() = default;
    FFCBlock(std::int64_t channels, double ratio, Rng& rng, DType dt);
    Tensor operator()(const Tensor& x, bool training) const;
    /// Zeroes the second layer's convolutions so the block starts as the identity.
    void zero_residual_outputs();
    void collect(ParamSet& ps, const std::string& prefix) const;
};

/// y = conv_f(x) * sigmoid(conv_g(x)).
struct GatedConv {
    Conv2d feature, gate;

    GatedConv() = default;
    GatedConv(std::int64_t in, std::int64_t out, int kernel, ConvSpec spec, Rng& rng, DType dt);
    Tensor operator()(const Tensor& x) const;
    void collect(ParamSet& ps, const std::string& prefix) const;
};

struct GatedConvTranspose {
    ConvTranspose2d feature, gate;

    GatedConvTranspose() = default;
    GatedConvTranspose(std::int64_t in, std::int64_t out, int kernel, ConvSpec spec, Rng& rng, DType dt);
    Tensor operator()(const Tensor& x) const;
    void collect(ParamSet& ps, const std::string& prefix) const;
};

/// conv(dilation 2) -> BN -> ReLU -> conv -> BN, plus the input.
struct DilatedResBlock {
    Conv2d c1, c2;
    BatchNorm2d bn1, bn2;

    DilatedResBlock() = default;
    DilatedResBlock(std::int64_t channels, Rng& rng, DType dt);
    Tensor operator()(const Tensor& x, bool training) const;
    void collect(ParamSet& ps, const std::string& prefix) const;
};

struct TextureConfig {
    std::array<std::int64_t, 4> channels{64, 128, 256, 512};
    int ffc_blocks = 9;
    double global_ratio = 0.5;
    int mpe_channels = 64;
    int sfe_res_blocks = 3;
    DType dtype = DType::f32;

    static TextureConfig paper();
    static TextureConfig tiny();
};

/// S_0 (1/8 res, channels[3]), S_1 (1/4, channels[2]), S_2 (1/2, channels[1]), S_3 (full, channels[0]).
struct StructurePyramid {
    std::array<Tensor, 4> s;
};

class SFE {
public:
    SFE() = default;
    SFE(const TextureConfig& cfg, std::uint64_t seed);
    /// edge, line, mask [N,1,H,W]; H, W divisible by 8.
    StructurePyramid operator()(const Tensor& edge, const Tensor& line, const Tensor& mask, bool training) const;
    ParamSet params() const;

private:
    std::array<GatedConv, 4> enc_;
    std::array<BatchNorm2d, 4> enc_bn_;
    std::vector<DilatedResBlock> mid_;
    std::array<GatedConvTranspose, 3> dec_;
    std::array<BatchNorm2d, 3> dec_bn_;
};

/// ReLU(BN(conv(x + alpha * s))). An undefined `s` skips the addition.
Tensor zerora_fuse(const Tensor& x, const Tensor& s, const Tensor& alpha, const Conv2d& conv, const BatchNorm2d& bn, bool training);

struct FTROutput {
    Tensor prediction;  // tanh output, [-1,1]
    Tensor composite;   // mask * prediction + (1 - mask) * input
};

class FTR {
public:
    FTR() = default;
    FTR(const TextureConfig& cfg, std::uint64_t seed);

    /// image [N,3,H,W] in [-1,1] with masked pixels zeroed, mask [N,1,H,W]; mpe [N,d,H,W] or undefined;
    /// structure may be null. H, W divisible by 8.
    FTROutput operator()(const Tensor& image, const Tensor& mask, const Tensor& mpe, const StructurePyramid* structure,
                         bool training) const;

    /// alpha_0..alpha_3, shape [1], zero after construction.
    std::array<Tensor, 4>& alpha() { return alpha_; }
    const std::array<Tensor, 4>& alpha() const { return alpha_; }
    void set_alpha(double v);
    std::vector<FFCBlock>& blocks() { return blocks_; }
    /// Masking positional encoding p [N,d,H,W] of a mask batch [N,1,H,W], from the owned MPE table.
    Tensor positional(const Tensor& mask) const;
    const MPE& mpe() const { return mpe_; }
    /// Parameters of the texture network; `with_alpha` adds the ZeroRA weights.
    ParamSet params(bool with_alpha = true) const;
    const TextureConfig& config() const { return cfg_; }

private:
    TextureConfig cfg_;
    std::array<Conv2d, 4> enc_;
    std::array<BatchNorm2d, 4> enc_bn_;
    Conv2d mpe_proj_;
    std::vector<FFCBlock> blocks_;
    std::array<ConvTranspose2d, 3> dec_;
    std::array<BatchNorm2d, 3> dec_bn_;
    Conv2d out_;
    std::array<Tensor, 4> alpha_;
    MPE mpe_;
};

}  // namespace inpaint
