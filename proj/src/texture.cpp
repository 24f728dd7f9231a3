#include "inpaint/texture.hpp"

#include <cmath>

#include "inpaint/ops.hpp"

namespace inpaint {

namespace {

constexpr ConvSpec k1{1, 0, 1};
constexpr ConvSpec k3{1, 1, 1};
constexpr ConvSpec k7{1, 3, 1};
constexpr ConvSpec down{2, 1, 1};

Tensor bn_relu(const BatchNorm2d& bn, const Tensor& x, bool training) { return relu(bn(x, training)); }

}  // namespace

SpectralTransform::SpectralTransform(std::int64_t c, Rng& rng, DType dt)
    : conv(2 * c, 2 * c, 1, k1, rng, dt, false), bn(2 * c, dt) {}

Tensor SpectralTransform::operator()(const Tensor& x, bool training) const {
    if (x.rank() != 4 || x.size(2) % 2 || x.size(3) % 2)
        throw DimensionError("spectral transform needs even spatial extents, got " + shape_str(x.shape()));
    Tensor f = conv(rfft2_stacked(x));
    if (!linear) f = relu(bn(f, training));
    return irfft2_stacked(f);
}

void SpectralTransform::collect(ParamSet& ps, const std::string& prefix) const {
    conv.collect(ps, prefix + ".conv");
    bn.collect(ps, prefix + ".bn");
}

GlobalBranch::GlobalBranch(std::int64_t in, std::int64_t out, Rng& rng, DType dt)
    : pre(in, out / 2, 1, k1, rng, dt, false), pre_bn(out / 2, dt), spectral(out / 2, rng, dt), post(out / 2, out, 1, k1, rng, dt, false) {
    if (out < 2) throw ContractError("global branch needs at least 2 channels");
}

Tensor GlobalBranch::operator()(const Tensor& x, bool training) const {
    Tensor h = bn_relu(pre_bn, pre(x), training);
    return post(add(h, spectral(h, training)));
}

void GlobalBranch::collect(ParamSet& ps, const std::string& prefix) const {
    pre.collect(ps, prefix + ".pre");
    pre_bn.collect(ps, prefix + ".pre_bn");
    spectral.collect(ps, prefix + ".spectral");
    post.collect(ps, prefix + ".post");
}

FFCLayer::FFCLayer(std::int64_t c, double ratio, Rng& rng, DType dt) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ContractError("FFC global ratio must lie in (0,1)");
    global = static_cast<std::int64_t>(std::lround(static_cast<double>(c) * ratio));
    local = c - global;
    if (local < 1 || global < 2) throw ContractError("FFC channel split leaves an empty branch");
    l2l = Conv2d(local, local, 3, k3, rng, dt, false);
    l2g = Conv2d(local, global, 3, k3, rng, dt, false);
    g2l = Conv2d(global, local, 3, k3, rng, dt, false);
    g2g = GlobalBranch(global, global, rng, dt);
    bn_l = BatchNorm2d(local, dt);
    bn_g = BatchNorm2d(global, dt);
}

Tensor FFCLayer::operator()(const Tensor& x, bool training) const {
    if (x.size(1) != local + global)
        throw DimensionError("FFC layer expects " + std::to_string(local + global) + " channels, got " + shape_str(x.shape()));
    Tensor xl = slice(x, 1, 0, local), xg = slice(x, 1, local, global);
    Tensor ol = add(l2l(xl), g2l(xg));
    Tensor og = add(l2g(xl), g2g(xg, training));
    return concat({bn_relu(bn_l, ol, training), bn_relu(bn_g, og, training)}, 1);
}

void FFCLayer::collect(ParamSet& ps, const std::string& prefix) const {
    l2l.collect(ps, prefix + ".l2l");
    l2g.collect(ps, prefix + ".l2g");
    g2l.collect(ps, prefix + ".g2l");
    g2g.collect(ps, prefix + ".g2g");
    bn_l.collect(ps, prefix + ".bn_l");
    bn_g.collect(ps, prefix + ".bn_g");
}

FFCBlock::FFCBlock(std::int64_t c, double ratio, Rng& rng, DType dt) : a(c, ratio, rng, dt), b(c, ratio, rng, dt) {}

Tensor FFCBlock::operator()(const Tensor& x, bool training) const { return add(x, b(a(x, training), training)); }

void FFCBlock::zero_residual_outputs() {
    for (Conv2d* c : {&b.l2l, &b.l2g, &b.g2l, &b.g2g.post}) c->weight = Tensor::zeros(c->weight.shape(), c->weight.dtype());
}

void FFCBlock::collect(ParamSet& ps, const std::string& prefix) const {
    a.collect(ps, prefix + ".a");
    b.collect(ps, prefix + ".b");
}

GatedConv::GatedConv(std::int64_t in, std::int64_t out, int k, ConvSpec spec, Rng& rng, DType dt)
    : feature(in, out, k, spec, rng, dt), gate(in, out, k, spec, rng, dt) {}

Tensor GatedConv::operator()(const Tensor& x) const { return mul(feature(x), sigmoid(gate(x))); }

void GatedConv::collect(ParamSet& ps, const std::string& prefix) const {
    feature.collect(ps, prefix + ".feature");
    gate.collect(ps, prefix + ".gate");
}

GatedConvTranspose::GatedConvTranspose(std::int64_t in, std::int64_t out, int k, ConvSpec spec, Rng& rng, DType dt)
    : feature(in, out, k, spec, rng, dt), gate(in, out, k, spec, rng, dt) {}

Tensor GatedConvTranspose::operator()(const Tensor& x) const { return mul(feature(x), sigmoid(gate(x))); }

void GatedConvTranspose::collect(ParamSet& ps, const std::string& prefix) const {
    feature.collect(ps, prefix + ".feature");
    gate.collect(ps, prefix + ".gate");
}

DilatedResBlock::DilatedResBlock(std::int64_t c, Rng& rng, DType dt)
    : c1(c, c, 3, ConvSpec{1, 2, 2}, rng, dt, false), c2(c, c, 3, k3, rng, dt, false), bn1(c, dt), bn2(c, dt) {}

Tensor DilatedResBlock::operator()(const Tensor& x, bool training) const {
    return add(x, bn2(c2(bn_relu(bn1, c1(x), training)), training));
}

void DilatedResBlock::collect(ParamSet& ps, const std::string& prefix) const {
    c1.collect(ps, prefix + ".c1");
    c2.collect(ps, prefix + ".c2");
    bn1.collect(ps, prefix + ".bn1");
    bn2.collect(ps, prefix + ".bn2");
}

TextureConfig TextureConfig::paper() { return TextureConfig{}; }

TextureConfig TextureConfig::tiny() {
    TextureConfig c;
    c.channels = {16, 32, 64, 128};
    c.ffc_blocks = 3;
    return c;
}

SFE::SFE(const TextureConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    const auto& ch = cfg.channels;
    const auto dt = cfg.dtype;
    enc_[0] = GatedConv(3, ch[0], 7, k7, rng, dt);
    for (int i = 1; i < 4; ++i) enc_[i] = GatedConv(ch[i - 1], ch[i], 4, down, rng, dt);
    for (int i = 0; i < 4; ++i) enc_bn_[i] = BatchNorm2d(ch[i], dt);
    for (int i = 0; i < cfg.sfe_res_blocks; ++i) mid_.emplace_back(ch[3], rng, dt);
    for (int i = 0; i < 3; ++i) {
        dec_[i] = GatedConvTranspose(ch[3 - i], ch[2 - i], 4, down, rng, dt);
        dec_bn_[i] = BatchNorm2d(ch[2 - i], dt);
    }
}

StructurePyramid SFE::operator()(const Tensor& edge, const Tensor& line, const Tensor& mask, bool training) const {
    if (edge.shape() != line.shape() || edge.shape() != mask.shape() || edge.rank() != 4 || edge.size(1) != 1)
        throw DimensionError("SFE expects edge, line and mask as matching [N,1,H,W] maps, got " + shape_str(edge.shape()) + ", " +
                             shape_str(line.shape()) + ", " + shape_str(mask.shape()));
    if (edge.size(2) % 8 || edge.size(3) % 8) throw DimensionError("SFE needs spatial extents divisible by 8, got " + shape_str(edge.shape()));
    Tensor x = concat({edge, line, mask}, 1);
    for (int i = 0; i < 4; ++i) x = bn_relu(enc_bn_[i], enc_[i](x), training);
    for (const auto& b : mid_) x = b(x, training);
    StructurePyramid p;
    p.s[0] = x;
    for (int i = 0; i < 3; ++i) {
        x = bn_relu(dec_bn_[i], dec_[i](x), training);
        p.s[i + 1] = x;
    }
    return p;
}

ParamSet SFE::params() const {
    ParamSet ps;
    for (int i = 0; i < 4; ++i) {
        enc_[i].collect(ps, "sfe.enc" + std::to_string(i));
        enc_bn_[i].collect(ps, "sfe.enc_bn" + std::to_string(i));
    }
    for (std::size_t i = 0; i < mid_.size(); ++i) mid_[i].collect(ps, "sfe.mid" + std::to_string(i));
    for (int i = 0; i < 3; ++i) {
        dec_[i].collect(ps, "sfe.dec" + std::to_string(i));
        dec_bn_[i].collect(ps, "sfe.dec_bn" + std::to_string(i));
    }
    return ps;
}

Tensor zerora_fuse(const Tensor& x, const Tensor& s, const Tensor& alpha, const Conv2d& conv, const BatchNorm2d& bn, bool training) {
    Tensor in = x;
    if (s.defined()) {
        if (s.shape() != x.shape())
            throw DimensionError("ZeroRA: structure feature " + shape_str(s.shape()) + " does not match layer input " + shape_str(x.shape()));
        in = add(x, mul(s, alpha));
    }
    return relu(bn(conv(in), training));
}

FTR::FTR(const TextureConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    Rng rng(seed);
    const auto& ch = cfg.channels;
    const auto dt = cfg.dtype;
    // every encoder/decoder conv feeds a BN, so biases would be dead parameters
    enc_[0] = Conv2d(4, ch[0], 7, k7, rng, dt, false);
    for (int i = 1; i < 4; ++i) enc_[i] = Conv2d(ch[i - 1], ch[i], 4, down, rng, dt, false);
    for (int i = 0; i < 4; ++i) enc_bn_[i] = BatchNorm2d(ch[i], dt);
    mpe_proj_ = Conv2d(cfg.mpe_channels, ch[0], 1, k1, rng, dt, false);
    for (int i = 0; i < cfg.ffc_blocks; ++i) blocks_.emplace_back(ch[3], cfg.global_ratio, rng, dt);
    for (int i = 0; i < 3; ++i) {
        dec_[i] = ConvTranspose2d(ch[3 - i], ch[2 - i], 4, down, rng, dt);
        dec_[i].bias = Tensor();
        dec_bn_[i] = BatchNorm2d(ch[2 - i], dt);
    }
    out_ = Conv2d(ch[0], 3, 7, k7, rng, dt);
    for (auto& a : alpha_) a = Tensor::zeros({1}, dt);
    mpe_ = MPE(MPEConfig{128, cfg.mpe_channels}, rng, dt);
}

Tensor FTR::positional(const Tensor& mask) const {
    if (mask.rank() != 4 || mask.size(1) != 1) throw DimensionError("FTR positional: mask must be [N,1,H,W], got " + shape_str(mask.shape()));
    std::vector<Tensor> maps;
    for (std::int64_t n = 0; n < mask.size(0); ++n) maps.push_back(mpe_(BinaryMask::from_tensor(slice(mask, 0, n, 1))).p);
    return maps.size() == 1 ? maps[0] : concat(maps, 0);
}

void FTR::set_alpha(double v) {
    for (auto& a : alpha_)
        dispatch(a.dtype(), [&]<typename T>() { a.mutable_data<T>()[0] = static_cast<T>(v); });
}

FTROutput FTR::operator()(const Tensor& image, const Tensor& mask, const Tensor& mpe, const StructurePyramid* st, bool training) const {
    if (image.rank() != 4 || image.size(1) != 3 || mask.rank() != 4 || mask.size(1) != 1 || image.size(0) != mask.size(0) ||
        image.size(2) != mask.size(2) || image.size(3) != mask.size(3))
        throw DimensionError("FTR expects image [N,3,H,W] and mask [N,1,H,W], got " + shape_str(image.shape()) + ", " + shape_str(mask.shape()));
    if (image.size(2) % 8 || image.size(3) % 8) throw DimensionError("FTR needs spatial extents divisible by 8, got " + shape_str(image.shape()));
    auto level = [&](int k) { return st ? st->s[k] : Tensor(); };
    Tensor a = enc_[0](concat({image, mask}, 1));
    if (mpe.defined()) {
        if (mpe.size(2) != image.size(2) || mpe.size(3) != image.size(3))
            throw DimensionError("FTR: MPE map " + shape_str(mpe.shape()) + " not at image resolution " + shape_str(image.shape()));
        a = add(a, mpe_proj_(mpe));
    }
    Tensor x = bn_relu(enc_bn_[0], a, training);
    x = zerora_fuse(x, level(3), alpha_[3], enc_[1], enc_bn_[1], training);
    x = zerora_fuse(x, level(2), alpha_[2], enc_[2], enc_bn_[2], training);
    x = zerora_fuse(x, level(1), alpha_[1], enc_[3], enc_bn_[3], training);
    if (st) {
        if (level(0).shape() != x.shape())
            throw DimensionError("ZeroRA: structure feature " + shape_str(level(0).shape()) + " does not match FFC input " + shape_str(x.shape()));
        x = add(x, mul(level(0), alpha_[0]));
    }
    for (const auto& b : blocks_) x = b(x, training);
    for (int i = 0; i < 3; ++i) x = bn_relu(dec_bn_[i], dec_[i](x), training);
    FTROutput o;
    o.prediction = tanh(out_(x));
    o.composite = add(mul(mask, o.prediction), mul(add_scalar(neg(mask), 1.0), image));
    return o;
}

ParamSet FTR::params(bool with_alpha) const {
    ParamSet ps;
    for (int i = 0; i < 4; ++i) {
        enc_[i].collect(ps, "ftr.enc" + std::to_string(i));
        enc_bn_[i].collect(ps, "ftr.enc_bn" + std::to_string(i));
    }
    mpe_proj_.collect(ps, "ftr.mpe_proj");
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect(ps, "ftr.block" + std::to_string(i));
    for (int i = 0; i < 3; ++i) {
        dec_[i].collect(ps, "ftr.dec" + std::to_string(i));
        dec_bn_[i].collect(ps, "ftr.dec_bn" + std::to_string(i));
    }
    out_.collect(ps, "ftr.out");
    mpe_.collect(ps, "ftr.mpe");
    if (with_alpha)
        for (int i = 0; i < 4; ++i) ps.add("ftr.alpha" + std::to_string(i), alpha_[i]);
    return ps;
}

}  // namespace inpaint
