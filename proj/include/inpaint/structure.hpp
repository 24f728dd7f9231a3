#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "inpaint/nn.hpp"
#include "inpaint/tensor.hpp"

namespace inpaint {

/// Score-tensor entries allocated by attention on this thread since the last reset.
struct AttentionCounters {
    std::int64_t axial = 0;
    std::int64_t standard = 0;
};
AttentionCounters& attention_counters();
void reset_attention_counters();

/// Multi-head projections; q,k,v,out map c -> c.
struct AttnProj {
    Linear q, k, v, out;
    int heads = 1;

    AttnProj() = default;
    AttnProj(std::int64_t channels, int heads, Rng& rng, DType dt);
    void collect(ParamSet& ps, const std::string& prefix) const;
};

enum class Axis { row, col };

/// Axial self-attention over x [N,h,w,c]. Rows attend along w, columns along h.
/// rpe is [heads, L, L] (L = w for rows, h for columns) added to the scaled
/// scores before the softmax; pass an undefined tensor for none.
Tensor axial_attention(const Tensor& x, Axis axis, const AttnProj& p, const Tensor& rpe);

/// Pre-softmax scores [groups, heads, L, L] of axial_attention.
Tensor axial_scores(const Tensor& x, Axis axis, const AttnProj& p, const Tensor& rpe);

/// Full self-attention over x [N,T,c], scale 1/sqrt(c/heads).
Tensor standard_attention(const Tensor& x, const AttnProj& p);

/// Pre-norm block: row-axial, column-axial, standard attention, MLP, each with a residual.
struct TransformerBlock {
    LayerNorm ln_row, ln_col, ln_attn, ln_mlp;
    AttnProj row, col, attn;
    Linear fc1, fc2;

    TransformerBlock() = default;
    TransformerBlock(std::int64_t channels, int heads, Rng& rng, DType dt);
    /// x [N,h,w,c]
    Tensor operator()(const Tensor& x, const Tensor& rpe_row, const Tensor& rpe_col) const;
    /// Zeroes every projection that feeds a residual (the block becomes the identity).
    void zero_residual_outputs();
    void collect(ParamSet& ps, const std::string& prefix) const;
};

struct TSRConfig {
    std::int64_t image_size = 256;
    std::int64_t channels = 256;  // attention width, equals conv_channels[3]
    int heads = 8;
    int blocks = 8;
    std::array<std::int64_t, 4> conv_channels{64, 128, 256, 256};
    DType dtype = DType::f32;
    bool line_boost = true;  // line logits x4 before the sigmoid at inference

    static TSRConfig paper();
    static TSRConfig tiny();
    /// tiny with attention width 64 (c_head 32); the calibrated toy-training model.
    static TSRConfig toy();
    std::int64_t attn_size() const { return image_size / 8; }
};

/// [N,3,H,W] image in [-1,1] with masked pixels zeroed, edge/line [N,1,H,W], mask [N,1,H,W].
struct SketchInput {
    Tensor image, edge, line, mask;
    Tensor stacked() const;  // [N,6,H,W]
};

struct SketchPrediction {
    Tensor edge;  // [N,1,H,W]
    Tensor line;
};

class TSR {
public:
    TSR() = default;
    TSR(const TSRConfig& cfg, std::uint64_t seed);

    const TSRConfig& config() const { return cfg_; }
    /// Raw 2-channel logits (edge, line) for a [N,6,H,W] input.
    Tensor logits(const Tensor& x) const;
    /// Sigmoid probabilities; `inference` applies the line boost when enabled.
    Tensor forward(const Tensor& x, bool inference) const;
    SketchPrediction predict(const SketchInput& in) const;

    ParamSet params() const;
    std::vector<TransformerBlock>& blocks() { return blocks_; }
    Tensor& rpe_row() { return rpe_row_; }
    Tensor& rpe_col() { return rpe_col_; }
    Tensor& pos_embedding() { return pos_; }

private:
    TSRConfig cfg_;
    std::array<Conv2d, 4> enc_;
    Tensor pos_;  // [h,w,c]
    Tensor rpe_row_, rpe_col_;
    std::vector<TransformerBlock> blocks_;
    LayerNorm ln_out_;
    std::array<ConvTranspose2d, 3> dec_;
    Conv2d head_;
};

struct MaskPredictResult {
    SketchPrediction output;
    std::vector<std::int64_t> committed_edge;  // cumulative committed count after each iteration
    std::vector<std::int64_t> committed_line;
    std::vector<Tensor> confidence;            // per iteration [N,2,H,W], max(p,1-p)
};

/// Iterative commit / re-mask decoding with a linear keep schedule ceil(t/T * masked).
MaskPredictResult mask_predict(const TSR& model, const SketchInput& in, int iterations = 5);

}  // namespace inpaint
