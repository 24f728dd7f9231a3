#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "inpaint/nn.hpp"
#include "inpaint/tensor.hpp"

namespace inpaint {

struct LossConfig {
    double l1 = 10.0;
    double adv = 10.0;
    double fm = 100.0;
    double hrf = 30.0;
    double gp = 1e-3;
    bool l1_full_grid = true;  // false normalizes by the unmasked pixel count
};

struct LossReport {
    std::int64_t step = 0;
    double l1 = 0, l_d = 0, l_g = 0, gp = 0, fm = 0, hrf = 0;
    double total = 0;
    /// total = l1*L1 + adv*(L_D + L_G + gp*GP) + fm*FM + hrf*HRF
    void finalize(const LossConfig& cfg);
};

/// Mean binary cross-entropy of probabilities against targets in [0,1]; probabilities are clamped to [1e-7, 1-1e-7].
Tensor bce_loss(const Tensor& prob, const Tensor& target);
/// Same value computed from logits (stable; no clamp).
Tensor bce_logits_loss(const Tensor& logits, const Tensor& target);

/// pred [N,2,H,W] (edge, line) probabilities; returns (L_e, L_l).
std::pair<Tensor, Tensor> bce_structure_loss(const Tensor& pred, const Tensor& edge_gt, const Tensor& line_gt);

/// mean over the grid of (1-M) * |gt - pred|; mask [N,1,H,W] broadcast over channels.
Tensor l1_unmasked(const Tensor& pred, const Tensor& gt, const Tensor& mask, bool full_grid = true);

/// Patch discriminator: stride-2 4x4 convs with leaky ReLU (0.2) between them.
struct PatchDiscriminator {
    std::vector<Conv2d> convs;
    double slope = 0.2;

    PatchDiscriminator() = default;
    /// widths lists the output channels of each layer; the last must be 1.
    PatchDiscriminator(std::int64_t in_channels, const std::vector<std::int64_t>& widths, Rng& rng, DType dt);
    struct Output {
        Tensor logits;               // [N,1,h,w]
        std::vector<Tensor> features;  // activations of all but the last layer
    };
    Output operator()(const Tensor& x) const;
    void collect(ParamSet& ps, const std::string& prefix) const;
};

/// Nearest-resizes mask to the patch grid; logits are clamped to +-20 before the logs.
std::pair<Tensor, Tensor> adversarial_losses(const Tensor& real_logits, const Tensor& fake_logits, const Tensor& mask);

/// mean over the batch of ||d(sum D(x)) / dx||^2, built from differentiable ops so it trains D.
Tensor gradient_penalty(const PatchDiscriminator& d, const Tensor& real);

/// Mean over layers of the mean absolute difference.
Tensor feature_match_loss(const std::vector<Tensor>& real, const std::vector<Tensor>& fake);

using FeatureExtractor = std::function<std::vector<Tensor>(const Tensor&)>;

/// Fixed-seed stack of 3 dilated 3x3 convs (dilation 1, 2, 4) with ReLU; weights never train.
struct HRFExtractor {
    std::vector<Conv2d> convs;
    HRFExtractor() = default;
    HRFExtractor(std::int64_t in_channels, std::int64_t width, std::uint64_t seed, DType dt);
    std::vector<Tensor> operator()(const Tensor& x) const;
};

/// Mean over layers of the mean squared feature difference.
Tensor hrf_loss(const Tensor& pred, const Tensor& gt, const FeatureExtractor& extractor);

}  // namespace inpaint
