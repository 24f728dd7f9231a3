#include "inpaint/losses.hpp"

#include "inpaint/ops.hpp"

namespace inpaint {

void LossReport::finalize(const LossConfig& c) {
    total = c.l1 * l1 + c.adv * (l_d + l_g + c.gp * gp) + c.fm * fm + c.hrf * hrf;
}

Tensor bce_loss(const Tensor& prob, const Tensor& target) {
    if (prob.shape() != target.shape())
        throw DimensionError("bce: prediction " + shape_str(prob.shape()) + " vs target " + shape_str(target.shape()));
    constexpr double eps = 1e-7;
    Tensor p = clamp(prob, eps, 1.0 - eps);
    Tensor one_minus_t = add_scalar(neg(target), 1.0);
    Tensor ll = add(mul(target, log(p)), mul(one_minus_t, log(add_scalar(neg(p), 1.0))));
    return neg(mean(ll));
}

Tensor bce_logits_loss(const Tensor& z, const Tensor& target) {
    if (z.shape() != target.shape())
        throw DimensionError("bce: logits " + shape_str(z.shape()) + " vs target " + shape_str(target.shape()));
    // max(z,0) - z*t + log(1 + exp(-|z|))
    Tensor softplus_neg_abs = log(add_scalar(exp(neg(abs(z))), 1.0));
    return mean(add(sub(relu(z), mul(z, target)), softplus_neg_abs));
}

std::pair<Tensor, Tensor> bce_structure_loss(const Tensor& pred, const Tensor& edge_gt, const Tensor& line_gt) {
    if (pred.rank() != 4 || pred.size(1) != 2) throw DimensionError("structure loss expects [N,2,H,W], got " + shape_str(pred.shape()));
    return {bce_loss(slice(pred, 1, 0, 1), edge_gt), bce_loss(slice(pred, 1, 1, 1), line_gt)};
}

Tensor l1_unmasked(const Tensor& pred, const Tensor& gt, const Tensor& mask, bool full_grid) {
    if (pred.shape() != gt.shape()) throw DimensionError("l1: " + shape_str(pred.shape()) + " vs " + shape_str(gt.shape()));
    Tensor keep = add_scalar(neg(mask), 1.0);
    Tensor term = mul(abs(sub(gt, pred)), keep);
    if (full_grid) return mean(term);
    Tensor kb = broadcast_to(keep, pred.shape());
    double n = sum(kb).item();
    if (n == 0.0) return mul_scalar(sum(term), 0.0);
    return mul_scalar(sum(term), 1.0 / n);
}

PatchDiscriminator::PatchDiscriminator(std::int64_t in, const std::vector<std::int64_t>& widths, Rng& rng, DType dt) {
    if (widths.empty() || widths.back() != 1) throw ContractError("discriminator: last layer must have one channel");
    for (auto w : widths) {
        convs.emplace_back(in, w, 4, ConvSpec{2, 1, 1}, rng, dt);
        in = w;
    }
}

PatchDiscriminator::Output PatchDiscriminator::operator()(const Tensor& x) const {
    Output o;
    Tensor h = x;
    for (std::size_t i = 0; i < convs.size(); ++i) {
        h = convs[i](h);
        if (i + 1 < convs.size()) {
            h = leaky_relu(h, slope);
            o.features.push_back(h);
        }
    }
    o.logits = h;
    return o;
}

void PatchDiscriminator::collect(ParamSet& ps, const std::string& prefix) const {
    for (std::size_t i = 0; i < convs.size(); ++i) convs[i].collect(ps, prefix + ".conv" + std::to_string(i));
}

namespace {

Tensor log_sigmoid_clamped(const Tensor& z) { return log(sigmoid(clamp(z, -20.0, 20.0))); }

}  // namespace

std::pair<Tensor, Tensor> adversarial_losses(const Tensor& real_logits, const Tensor& fake_logits, const Tensor& mask) {
    if (real_logits.shape() != fake_logits.shape())
        throw DimensionError("adversarial: real " + shape_str(real_logits.shape()) + " vs fake " + shape_str(fake_logits.shape()));
    if (mask.rank() != 4 || mask.size(0) != fake_logits.size(0) || mask.size(1) != 1)
        throw DimensionError("adversarial: mask " + shape_str(mask.shape()) + " does not match patch grid " + shape_str(fake_logits.shape()));
    Tensor m = resize_nearest(mask, fake_logits.size(2), fake_logits.size(3)).detach();
    Tensor keep = add_scalar(neg(m), 1.0);
    Tensor ls_fake = log_sigmoid_clamped(fake_logits);
    Tensor ls_fake_neg = log_sigmoid_clamped(neg(fake_logits));  // log(1 - sigmoid(z))
    Tensor l_d = neg(add(add(mean(log_sigmoid_clamped(real_logits)), mean(mul(ls_fake, keep))), mean(mul(ls_fake_neg, m))));
    Tensor l_g = neg(mean(ls_fake));
    return {l_d, l_g};
}

Tensor gradient_penalty(const PatchDiscriminator& d, const Tensor& real) {
    // forward, keeping pre-activations for the leaky masks
    std::vector<Tensor> inputs;
    std::vector<Tensor> slopes;
    Tensor h = real.detach();
    for (std::size_t i = 0; i < d.convs.size(); ++i) {
        inputs.push_back(h);
        Tensor a = d.convs[i](h);
        if (i + 1 < d.convs.size()) {
            auto av = a.to_vector();
            for (auto& v : av) v = v > 0 ? 1.0 : d.slope;
            slopes.push_back(Tensor::from_doubles(a.shape(), av, a.dtype()));
            h = leaky_relu(a, d.slope);
        } else {
            h = a;
        }
    }
    // adjoint sweep from d(sum logits) = 1
    Tensor g = Tensor::ones(h.shape(), h.dtype());
    for (std::size_t i = d.convs.size(); i-- > 0;) {
        const auto& c = d.convs[i];
        const auto& in = inputs[i];
        const auto kh = c.weight.size(2);
        const int op_h = static_cast<int>(in.size(2) - tconv_out_extent(g.size(2), kh, c.spec));
        const int op_w = static_cast<int>(in.size(3) - tconv_out_extent(g.size(3), c.weight.size(3), c.spec));
        if (op_h != op_w) throw ContractError("gradient penalty: non-square output padding");
        g = conv_transpose2d(g, c.weight, Tensor(), c.spec, op_h);
        if (i > 0) g = mul(g, slopes[i - 1]);
    }
    const auto N = g.size(0);
    return mul_scalar(sum(square(g)), 1.0 / static_cast<double>(N));
}

Tensor feature_match_loss(const std::vector<Tensor>& real, const std::vector<Tensor>& fake) {
    if (real.size() != fake.size() || real.empty())
        throw ContractError("feature match: layer counts differ (" + std::to_string(real.size()) + " vs " + std::to_string(fake.size()) + ")");
    Tensor acc;
    for (std::size_t i = 0; i < real.size(); ++i) {
        Tensor li = mean(abs(sub(real[i], fake[i])));
        acc = acc.defined() ? add(acc, li) : li;
    }
    return mul_scalar(acc, 1.0 / static_cast<double>(real.size()));
}

HRFExtractor::HRFExtractor(std::int64_t in, std::int64_t width, std::uint64_t seed, DType dt) {
    Rng rng(seed);
    int dil = 1;
    for (int i = 0; i < 3; ++i, dil *= 2) {
        convs.emplace_back(in, width, 3, ConvSpec{1, dil, dil}, rng, dt);
        in = width;
    }
}

std::vector<Tensor> HRFExtractor::operator()(const Tensor& x) const {
    std::vector<Tensor> f;
    Tensor h = x;
    for (const auto& c : convs) {
        h = relu(c(h));
        f.push_back(h);
    }
    return f;
}

Tensor hrf_loss(const Tensor& pred, const Tensor& gt, const FeatureExtractor& extractor) {
    auto fp = extractor(pred);
    auto fg = extractor(gt);
    if (fp.size() != fg.size() || fp.empty()) throw ContractError("hrf: extractor returned inconsistent layer lists");
    Tensor acc;
    for (std::size_t i = 0; i < fp.size(); ++i) {
        Tensor li = mean(square(sub(fg[i], fp[i])));
        acc = acc.defined() ? add(acc, li) : li;
    }
    return mul_scalar(acc, 1.0 / static_cast<double>(fp.size()));
}

}  // namespace inpaint
