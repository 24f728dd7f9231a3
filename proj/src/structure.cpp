#include "inpaint/structure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "inpaint/autograd.hpp"
#include "inpaint/ops.hpp"

namespace inpaint {

namespace {

thread_local AttentionCounters g_counters;

// [B,L,c] -> [B*H,L,c/H]
Tensor split_heads(const Tensor& t, int heads) {
    const auto B = t.size(0), L = t.size(1), c = t.size(2);
    return reshape(permute(reshape(t, {B, L, heads, c / heads}), {0, 2, 1, 3}), {B * heads, L, c / heads});
}

Tensor merge_heads(const Tensor& t, std::int64_t B, int heads) {
    const auto L = t.size(1), ch = t.size(2);
    return reshape(permute(reshape(t, {B, heads, L, ch}), {0, 2, 1, 3}), {B, L, heads * ch});
}

Tensor grouped_scores(const Tensor& q, const Tensor& k, const Tensor& rpe, std::int64_t B, int heads, std::int64_t& entries) {
    const auto L = q.size(1);
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.size(2)));
    Tensor scores = mul_scalar(matmul(q, transpose(k, 1, 2)), scale);  // [B*H,L,L]
    entries += scores.numel();
    if (rpe.defined()) {
        if (rpe.shape() != Shape{heads, L, L})
            throw DimensionError("RPE table " + shape_str(rpe.shape()) + " does not match heads x " + std::to_string(L) + " x " + std::to_string(L));
        scores = reshape(add(reshape(scores, {B, heads, L, L}), rpe), {B * heads, L, L});
    }
    return scores;
}

// Self-attention within groups: x [B,L,c] -> [B,L,c].
Tensor grouped_attention(const Tensor& x, const AttnProj& p, const Tensor& rpe, std::int64_t& entries) {
    const auto B = x.size(0), c = x.size(2);
    if (c % p.heads) throw DimensionError("attention width " + std::to_string(c) + " not divisible by heads");
    Tensor q = split_heads(p.q(x), p.heads);
    Tensor k = split_heads(p.k(x), p.heads);
    Tensor v = split_heads(p.v(x), p.heads);
    Tensor att = softmax(grouped_scores(q, k, rpe, B, p.heads, entries), 2);
    return p.out(merge_heads(matmul(att, v), B, p.heads));
}

Tensor axial_groups(const Tensor& x, Axis axis) {
    if (x.rank() != 4) throw DimensionError("axial attention expects [N,h,w,c], got " + shape_str(x.shape()));
    const auto N = x.size(0), h = x.size(1), w = x.size(2), c = x.size(3);
    if (axis == Axis::row) return reshape(x, {N * h, w, c});
    if (axis == Axis::col) return reshape(permute(x, {0, 2, 1, 3}), {N * w, h, c});
    throw ContractError("axial attention: invalid axis");
}

}  // namespace

AttentionCounters& attention_counters() { return g_counters; }
void reset_attention_counters() { g_counters = {}; }

AttnProj::AttnProj(std::int64_t c, int h, Rng& rng, DType dt)
    : q(c, c, rng, dt), k(c, c, rng, dt), v(c, c, rng, dt), out(c, c, rng, dt), heads(h) {
    if (h < 1 || c % h) throw ContractError("attention width must be divisible by the head count");
}

void AttnProj::collect(ParamSet& ps, const std::string& prefix) const {
    q.collect(ps, prefix + ".q");
    k.collect(ps, prefix + ".k");
    v.collect(ps, prefix + ".v");
    out.collect(ps, prefix + ".out");
}

Tensor axial_attention(const Tensor& x, Axis axis, const AttnProj& p, const Tensor& rpe) {
    Tensor g = axial_groups(x, axis);
    Tensor y = grouped_attention(g, p, rpe, g_counters.axial);
    const auto N = x.size(0), h = x.size(1), w = x.size(2), c = x.size(3);
    if (axis == Axis::row) return reshape(y, {N, h, w, c});
    return permute(reshape(y, {N, w, h, c}), {0, 2, 1, 3});
}

Tensor axial_scores(const Tensor& x, Axis axis, const AttnProj& p, const Tensor& rpe) {
    Tensor g = axial_groups(x, axis);
    const auto B = g.size(0), L = g.size(1);
    std::int64_t unused = 0;
    Tensor s = grouped_scores(split_heads(p.q(g), p.heads), split_heads(p.k(g), p.heads), rpe, B, p.heads, unused);
    return reshape(s, {B, p.heads, L, L});
}

Tensor standard_attention(const Tensor& x, const AttnProj& p) {
    if (x.rank() != 3) throw DimensionError("standard attention expects [N,T,c], got " + shape_str(x.shape()));
    return grouped_attention(x, p, Tensor(), g_counters.standard);
}

TransformerBlock::TransformerBlock(std::int64_t c, int heads, Rng& rng, DType dt)
    : ln_row(c, dt), ln_col(c, dt), ln_attn(c, dt), ln_mlp(c, dt),
      row(c, heads, rng, dt), col(c, heads, rng, dt), attn(c, heads, rng, dt),
      fc1(c, 4 * c, rng, dt), fc2(4 * c, c, rng, dt) {}

Tensor TransformerBlock::operator()(const Tensor& x, const Tensor& rpe_row, const Tensor& rpe_col) const {
    const auto N = x.size(0), h = x.size(1), w = x.size(2), c = x.size(3);
    Tensor y = add(x, axial_attention(ln_row(x), Axis::row, row, rpe_row));
    y = add(y, axial_attention(ln_col(y), Axis::col, col, rpe_col));
    y = add(y, reshape(standard_attention(reshape(ln_attn(y), {N, h * w, c}), attn), {N, h, w, c}));
    return add(y, fc2(gelu(fc1(ln_mlp(y)))));
}

void TransformerBlock::zero_residual_outputs() {
    for (Linear* l : {&row.out, &col.out, &attn.out, &fc2}) {
        l->weight = Tensor::zeros(l->weight.shape(), l->weight.dtype());
        l->bias = Tensor::zeros(l->bias.shape(), l->bias.dtype());
    }
}

void TransformerBlock::collect(ParamSet& ps, const std::string& prefix) const {
    ln_row.collect(ps, prefix + ".ln_row");
    ln_col.collect(ps, prefix + ".ln_col");
    ln_attn.collect(ps, prefix + ".ln_attn");
    ln_mlp.collect(ps, prefix + ".ln_mlp");
    row.collect(ps, prefix + ".row");
    col.collect(ps, prefix + ".col");
    attn.collect(ps, prefix + ".attn");
    fc1.collect(ps, prefix + ".fc1");
    fc2.collect(ps, prefix + ".fc2");
}

TSRConfig TSRConfig::paper() { return TSRConfig{}; }

TSRConfig TSRConfig::tiny() {
    TSRConfig c;
    c.image_size = 64;
    c.channels = 32;
    c.heads = 2;
    c.blocks = 2;
    c.conv_channels = {32, 64, 32, 32};
    return c;
}

TSRConfig TSRConfig::toy() {
    TSRConfig c = tiny();
    c.channels = 64;
    c.conv_channels = {32, 64, 64, 64};
    return c;
}

Tensor SketchInput::stacked() const {
    if (image.size(1) != 3 || edge.size(1) != 1 || line.size(1) != 1 || mask.size(1) != 1)
        throw DimensionError("sketch input expects image [N,3,H,W] and edge/line/mask [N,1,H,W]");
    return concat({image, edge, line, mask}, 1);
}

TSR::TSR(const TSRConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.image_size % 8) throw ContractError("TSR image size must be divisible by 8");
    if (cfg.channels != cfg.conv_channels[3]) throw ContractError("TSR attention width must equal the last encoder width");
    Rng rng(seed);
    const auto dt = cfg.dtype;
    const auto& ch = cfg.conv_channels;
    enc_[0] = Conv2d(6, ch[0], 7, {1, 3, 1}, rng, dt);
    enc_[1] = Conv2d(ch[0], ch[1], 4, {2, 1, 1}, rng, dt);
    enc_[2] = Conv2d(ch[1], ch[2], 4, {2, 1, 1}, rng, dt);
    enc_[3] = Conv2d(ch[2], ch[3], 4, {2, 1, 1}, rng, dt);
    const auto s = cfg.attn_size();
    pos_ = Tensor::zeros({s, s, cfg.channels}, dt);
    rpe_row_ = Tensor::zeros({cfg.heads, s, s}, dt);
    rpe_col_ = Tensor::zeros({cfg.heads, s, s}, dt);
    for (int b = 0; b < cfg.blocks; ++b) blocks_.emplace_back(cfg.channels, cfg.heads, rng, dt);
    ln_out_ = LayerNorm(cfg.channels, dt);
    dec_[0] = ConvTranspose2d(ch[3], ch[2], 4, {2, 1, 1}, rng, dt);
    dec_[1] = ConvTranspose2d(ch[2], ch[1], 4, {2, 1, 1}, rng, dt);
    dec_[2] = ConvTranspose2d(ch[1], ch[0], 4, {2, 1, 1}, rng, dt);
    head_ = Conv2d(ch[0], 2, 7, {1, 3, 1}, rng, dt);
}

Tensor TSR::logits(const Tensor& x) const {
    if (x.rank() != 4 || x.size(1) != 6) throw DimensionError("TSR expects a [N,6,H,W] input, got " + shape_str(x.shape()));
    if (x.size(2) != cfg_.image_size || x.size(3) != cfg_.image_size)
        throw DimensionError("TSR configured for " + std::to_string(cfg_.image_size) + "x" + std::to_string(cfg_.image_size) +
                             " inputs, got " + shape_str(x.shape()));
    Tensor f = x;
    for (const auto& c : enc_) f = relu(c(f));
    Tensor t = add(permute(f, {0, 2, 3, 1}), pos_);  // [N,s,s,c]
    for (const auto& b : blocks_) t = b(t, rpe_row_, rpe_col_);
    t = ln_out_(t);
    f = permute(t, {0, 3, 1, 2});
    for (const auto& d : dec_) f = relu(d(f));
    return head_(f);
}

Tensor TSR::forward(const Tensor& x, bool inference) const {
    Tensor l = logits(x);
    if (inference && cfg_.line_boost) {
        Tensor scale = Tensor::from_doubles({1, 2, 1, 1}, {1.0, 4.0}, l.dtype());
        l = mul(l, scale);
    }
    return sigmoid(l);
}

SketchPrediction TSR::predict(const SketchInput& in) const {
    Tensor p = forward(in.stacked(), true);
    return {slice(p, 1, 0, 1), slice(p, 1, 1, 1)};
}

ParamSet TSR::params() const {
    ParamSet ps;
    for (int i = 0; i < 4; ++i) enc_[i].collect(ps, "tsr.enc" + std::to_string(i));
    ps.add("tsr.pos", pos_);
    ps.add("tsr.rpe_row", rpe_row_);
    ps.add("tsr.rpe_col", rpe_col_);
    for (std::size_t b = 0; b < blocks_.size(); ++b) blocks_[b].collect(ps, "tsr.block" + std::to_string(b));
    ln_out_.collect(ps, "tsr.ln_out");
    for (int i = 0; i < 3; ++i) dec_[i].collect(ps, "tsr.dec" + std::to_string(i));
    head_.collect(ps, "tsr.head");
    return ps;
}

MaskPredictResult mask_predict(const TSR& model, const SketchInput& in, int iterations) {
    if (iterations < 1) throw ContractError("mask_predict: iteration count must be >= 1");
    NoGradGuard ng;
    const auto N = in.mask.size(0), H = in.mask.size(2), W = in.mask.size(3), HW = H * W;
    const auto dt = in.image.dtype();
    auto mask = in.mask.to_vector();
    std::vector<double> sketch[2] = {in.edge.to_vector(), in.line.to_vector()};
    std::vector<std::uint8_t> committed[2];
    std::vector<double> value[2];
    for (int c = 0; c < 2; ++c) {
        committed[c].assign(N * HW, 0);
        value[c].assign(N * HW, 0.0);
        for (std::int64_t i = 0; i < N * HW; ++i)
            if (mask[i] >= 0.5) sketch[c][i] = 0.0;
    }
    std::vector<std::vector<std::int64_t>> masked_idx(N);
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t p = 0; p < HW; ++p)
            if (mask[n * HW + p] >= 0.5) masked_idx[n].push_back(p);

    MaskPredictResult res;
    const Tensor image = in.image, mask_t = in.mask;
    for (int t = 1; t <= iterations; ++t) {
        std::vector<double> feed[2];
        for (int c = 0; c < 2; ++c) {
            feed[c] = sketch[c];
            for (std::int64_t i = 0; i < N * HW; ++i)
                if (committed[c][i]) feed[c][i] = value[c][i] >= 0.5 ? 1.0 : 0.0;
        }
        SketchInput step{image, Tensor::from_doubles({N, 1, H, W}, feed[0], dt), Tensor::from_doubles({N, 1, H, W}, feed[1], dt), mask_t};
        auto prob = model.forward(step.stacked(), true).to_vector();  // [N,2,H,W]
        std::vector<double> conf(prob.size());
        for (std::size_t i = 0; i < prob.size(); ++i) conf[i] = std::max(prob[i], 1.0 - prob[i]);
        res.confidence.push_back(Tensor::from_doubles({N, 2, H, W}, conf, dt));

        std::int64_t total[2] = {0, 0};
        for (std::int64_t n = 0; n < N; ++n) {
            const auto m = static_cast<std::int64_t>(masked_idx[n].size());
            const std::int64_t target = (t * m + iterations - 1) / iterations;
            for (int c = 0; c < 2; ++c) {
                std::vector<std::int64_t> open;
                std::int64_t have = 0;
                for (auto p : masked_idx[n]) {
                    if (committed[c][n * HW + p]) ++have;
                    else open.push_back(p);
                }
                const double* cf = conf.data() + (n * 2 + c) * HW;
                std::stable_sort(open.begin(), open.end(), [&](std::int64_t a, std::int64_t b) { return cf[a] > cf[b]; });
                const double* pr = prob.data() + (n * 2 + c) * HW;
                for (std::int64_t k = 0; k < target - have; ++k) {
                    const auto p = open[k];
                    committed[c][n * HW + p] = 1;
                    value[c][n * HW + p] = pr[p];
                }
                total[c] += target;
            }
        }
        res.committed_edge.push_back(total[0]);
        res.committed_line.push_back(total[1]);
    }
    std::vector<double> out[2];
    for (int c = 0; c < 2; ++c) {
        out[c] = sketch[c];
        for (std::int64_t i = 0; i < N * HW; ++i)
            if (mask[i] >= 0.5) out[c][i] = value[c][i];
    }
    // outside the mask the caller's sketch is returned unchanged
    Tensor e = Tensor::from_doubles({N, 1, H, W}, out[0], dt), l = Tensor::from_doubles({N, 1, H, W}, out[1], dt);
    res.output = {e, l};
    return res;
}

}  // namespace inpaint
