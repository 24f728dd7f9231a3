#include <chrono>
#include <cmath>
#include <complex>
#include <cstring>

#include "doctest.h"
#include "inpaint/autograd.hpp"
#include "inpaint/ops.hpp"
#include "inpaint/texture.hpp"
#include "test_util.hpp"

using namespace inpaint;
using namespace testutil;

namespace {

using cd = std::complex<double>;

// Weight with complex structure: each (o, c) pair multiplies the spectrum by m = w + i v.
Tensor complex_weight(std::int64_t C, const std::vector<cd>& m, DType dt) {
    std::vector<double> W(4 * C * C, 0.0);
    auto at = [&](std::int64_t r, std::int64_t c) -> double& { return W[r * 2 * C + c]; };
    for (std::int64_t o = 0; o < C; ++o)
        for (std::int64_t c = 0; c < C; ++c) {
            cd z = m[o * C + c];
            at(2 * o, 2 * c) = z.real();
            at(2 * o, 2 * c + 1) = -z.imag();
            at(2 * o + 1, 2 * c) = z.imag();
            at(2 * o + 1, 2 * c + 1) = z.real();
        }
    return Tensor::from_doubles({2 * C, 2 * C, 1, 1}, W, dt);
}

// Spatial kernel whose full-grid spectrum is m on the kept half, conj(m) on the mirrored half, Re(m) on
// the self-conjugate columns. Computed with a direct inverse DFT.
std::vector<double> multiplier_kernel(cd m, std::int64_t H, std::int64_t W) {
    std::vector<double> k(H * W, 0.0);
    for (std::int64_t a = 0; a < H; ++a)
        for (std::int64_t b = 0; b < W; ++b) {
            cd s = 0;
            for (std::int64_t u = 0; u < H; ++u)
                for (std::int64_t v = 0; v < W; ++v) {
                    cd mult = (v == 0 || 2 * v == W) ? cd(m.real(), 0) : (2 * v < W ? m : std::conj(m));
                    s += mult * std::polar(1.0, 2 * M_PI * (double(u * a) / H + double(v * b) / W));
                }
            k[a * W + b] = s.real() / double(H * W);
        }
    return k;
}

std::vector<double> circular_oracle(const Tensor& x, const std::vector<cd>& m) {
    const auto N = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
    auto xv = x.to_vector();
    std::vector<double> y(N * C * H * W, 0.0);
    for (std::int64_t o = 0; o < C; ++o)
        for (std::int64_t c = 0; c < C; ++c) {
            auto k = multiplier_kernel(m[o * C + c], H, W);
            for (std::int64_t n = 0; n < N; ++n)
                for (std::int64_t i = 0; i < H; ++i)
                    for (std::int64_t j = 0; j < W; ++j) {
                        double s = 0;
                        for (std::int64_t a = 0; a < H; ++a)
                            for (std::int64_t b = 0; b < W; ++b)
                                s += k[a * W + b] * xv[((n * C + c) * H + (i - a + H) % H) * W + (j - b + W) % W];
                        y[((n * C + o) * H + i) * W + j] += s;
                    }
        }
    return y;
}

TextureConfig micro(DType dt) {
    TextureConfig c;
    c.channels = {4, 8, 8, 8};
    c.ffc_blocks = 1;
    c.mpe_channels = 4;
    c.sfe_res_blocks = 1;
    c.dtype = dt;
    return c;
}

void randomize_bn(const ParamSet& ps, std::uint64_t seed) {
    Rng rng(seed);
    for (const auto& e : ps.entries()) {
        auto name = e.name;
        auto ends = [&](const char* s) { return name.size() > std::strlen(s) && name.compare(name.size() - std::strlen(s), std::strlen(s), s) == 0; };
        if (!(ends(".gamma") || ends(".beta") || ends(".running_mean") || ends(".running_var"))) continue;
        Tensor t = e.tensor;
        dispatch(t.dtype(), [&]<typename T>() {
            for (auto& v : t.mutable_data<T>()) v = static_cast<T>(ends(".running_var") ? rng.uniform(0.5, 1.5) : ends(".gamma") ? rng.uniform(0.5, 1.5) : rng.normal(0, 0.2));
        });
    }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

TEST_CASE("spectral transform: identity filter, linearity, odd extents") {
    for (DType dt : {DType::f32, DType::f64}) {
        Rng rng(1);
        SpectralTransform st(3, rng, dt);
        st.linear = true;
        std::vector<cd> id(9, 0.0);
        for (int c = 0; c < 3; ++c) id[c * 3 + c] = 1.0;
        st.conv.weight = complex_weight(3, id, dt);
        Tensor x = randn({2, 3, 8, 6}, 2, dt);
        CHECK(max_abs_diff(st(x, false), x) <= 1e-5);

        st.conv.weight = rng.normal_tensor({6, 6, 1, 1}, 0.5, dt);
        Tensor a = st(mul_scalar(x, -2.5), false), b = mul_scalar(st(x, false), -2.5);
        CHECK(rel_diff(a, b) <= 1e-5);
        CHECK_THROWS_AS(st(randn({1, 3, 7, 8}, 3, dt), false), DimensionError);
        CHECK_THROWS_AS(st(randn({1, 3, 8, 5}, 3, dt), false), DimensionError);
    }
}

TEST_CASE("spectral transform equals circular convolution in the linear regime") {
    Rng mr(5);
    for (auto [H, W] : {std::pair<std::int64_t, std::int64_t>{8, 8}, {6, 10}, {4, 12}}) {
        const std::int64_t C = 2;
        std::vector<cd> m(C * C);
        for (auto& z : m) z = cd(mr.normal(), mr.normal());
        for (DType dt : {DType::f32, DType::f64}) {
            Rng rng(1);
            SpectralTransform st(C, rng, dt);
            st.linear = true;
            st.conv.weight = complex_weight(C, m, dt);
            Tensor x = randn({2, C, H, W}, 9, dt);
            auto oracle = circular_oracle(x, m);
            Tensor ref = Tensor::from_doubles(x.shape(), oracle, DType::f64);
            CHECK(rel_diff(st(x, false).to(DType::f64), ref) <= 1e-4);
        }
    }
}

TEST_CASE("FFC block: zeroed outputs give identity, gradients, global receptive field") {
    Rng rng(3);
    FFCBlock blk(8, 0.5, rng, DType::f32);
    CHECK(blk.a.local == 4);
    CHECK(blk.a.global == 4);
    Tensor x = randn({2, 8, 8, 8}, 4, DType::f32);
    FFCBlock z = blk;
    z.zero_residual_outputs();
    // b's BN then sees a zero input; with beta = 0 and ReLU the residual branch is exactly zero
    CHECK(z(x, true).bitwise_equal(x));
    CHECK(z(x, false).bitwise_equal(x));

    Tensor wt = randn({2, 8, 8, 8}, 5, DType::f32);
    auto f32_loss = [&](const Tensor& in) { return mean(mul(blk(in, true), wt)); };
    CHECK(grad_check(f32_loss, x) <= 1e-3);

    Rng r64(3);
    FFCBlock b64(8, 0.5, r64, DType::f64);
    Tensor x64 = randn({2, 8, 8, 8}, 4), w64 = randn({2, 8, 8, 8}, 5);
    auto f64_loss = [&](const Tensor& in) { return sum(mul(b64(in, true), w64)); };
    CHECK(grad_check(f64_loss, x64) <= 1e-5);
    ParamSet ps;
    b64.collect(ps, "blk");
    CHECK(grad_check_params([&] { return sum(mul(b64(x64, true), w64)); }, ps.trainable(), {0.0, 6}) <= 1e-5);

    CHECK_THROWS_AS(blk(randn({1, 6, 8, 8}, 1, DType::f32), false), DimensionError);
    CHECK_THROWS_AS(FFCLayer(8, 1.0, rng, DType::f32), ContractError);
}

TEST_CASE("global branch: a single-pixel perturbation reaches every output pixel") {
    Rng rng(11);
    FFCLayer layer(8, 0.5, rng, DType::f64);
    randomize_bn([&] { ParamSet p; layer.collect(p, "l"); return p; }(), 12);
    Tensor xg = randn({1, 4, 8, 8}, 13);
    Tensor base = layer.g2g(xg, false);
    int probed = 0, full = 0;
    for (int y = 0; y < 8; y += 3)
        for (int xx = 0; xx < 8; xx += 3) {
            Tensor p = xg.clone();
            for (int c = 0; c < 4; ++c) p.set({0, c, y, xx}, p.at({0, c, y, xx}) + 1.0);
            Tensor d = sub(layer.g2g(p, false), base);
            auto dv = d.to_vector();
            bool all = true;
            for (int i = 0; i < 64; ++i) {
                double s = 0;
                for (int c = 0; c < 4; ++c) s += std::abs(dv[c * 64 + i]);
                all = all && s > 1e-12;
            }
            ++probed;
            full += all;
        }
    CHECK(full == probed);
}

TEST_CASE("gated conv: saturated gates and product oracle") {
    Rng rng(21);
    GatedConv g(3, 5, 3, ConvSpec{1, 1, 1}, rng, DType::f32);
    Tensor x = randn({2, 3, 9, 7}, 22, DType::f32);
    Tensor plain = g.feature(x);
    g.gate.weight = Tensor::zeros(g.gate.weight.shape(), DType::f32);
    g.gate.bias = Tensor::full({5}, 20.0, DType::f32);
    CHECK(max_abs_diff(g(x), plain) <= 1e-4);
    g.gate.bias = Tensor::full({5}, -20.0, DType::f32);
    CHECK(max_abs(g(x)) <= 1e-4);

    Rng r2(23);
    GatedConv h(3, 4, 4, ConvSpec{2, 1, 1}, r2, DType::f64);
    h.feature.bias = r2.normal_tensor({4}, 0.3, DType::f64);
    h.gate.bias = r2.normal_tensor({4}, 0.3, DType::f64);
    Tensor xd = randn({1, 3, 8, 8}, 24);
    Shape fs, gs;
    auto f = conv_oracle(xd, h.feature.weight, h.feature.bias, 2, 1, 1, fs);
    auto gt = conv_oracle(xd, h.gate.weight, h.gate.bias, 2, 1, 1, gs);
    std::vector<double> ref(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) ref[i] = f[i] / (1.0 + std::exp(-gt[i]));
    Tensor y = h(xd);
    CHECK(y.shape() == fs);
    CHECK(max_abs_diff(ref, y) <= 1e-6);

    GatedConvTranspose t(4, 3, 4, ConvSpec{2, 1, 1}, r2, DType::f64);
    Tensor yt = t(y);
    Tensor reft = mul(t.feature(y), sigmoid(t.gate(y)));
    CHECK(yt.shape() == Shape{1, 3, 8, 8});
    CHECK(max_abs_diff(yt, reft) <= 1e-12);
}

TEST_CASE("SFE pyramid shapes at full scale") {
    NoGradGuard ng;
    auto t0 = std::chrono::steady_clock::now();
    SFE sfe(TextureConfig::paper(), 7);
    for (std::int64_t s : {256}) {
        Tensor e = randu({1, 1, s, s}, 1, 0, 1, DType::f32), l = randu({1, 1, s, s}, 2, 0, 1, DType::f32);
        Tensor m = randu({1, 1, s, s}, 3, 0, 1, DType::f32);
        auto p = sfe(e, l, m, false);
        CHECK(p.s[0].shape() == Shape{1, 512, s / 8, s / 8});
        CHECK(p.s[1].shape() == Shape{1, 256, s / 4, s / 4});
        CHECK(p.s[2].shape() == Shape{1, 128, s / 2, s / 2});
        CHECK(p.s[3].shape() == Shape{1, 64, s, s});
    }
    MESSAGE("full-width SFE 256 forward: " << seconds_since(t0) << " s");
}

TEST_CASE("SFE full-conv scaling, errors and gradient census") {
    auto cfg = TextureConfig::tiny();
    SFE sfe(cfg, 8);
    {
        NoGradGuard ng;
        for (std::int64_t s : {256, 512}) {
            Tensor e = randu({1, 1, s, s}, 1, 0, 1, DType::f32);
            auto p = sfe(e, e, e, false);
            for (int k = 0; k < 4; ++k) {
                std::int64_t r = s >> (3 - k);
                CHECK(p.s[k].shape() == Shape{1, cfg.channels[3 - k], r, r});
            }
        }
        Tensor a = randu({1, 1, 64, 64}, 1, 0, 1, DType::f32);
        CHECK_THROWS_AS(sfe(a, randu({1, 2, 64, 64}, 1, 0, 1, DType::f32), a, false), DimensionError);
        CHECK_THROWS_AS(sfe(a, a, randu({1, 1, 32, 64}, 1, 0, 1, DType::f32), false), DimensionError);
    }

    ParamSet ps = sfe.params();
    Tensor e = randu({2, 1, 64, 64}, 31, 0, 1, DType::f32), l = randu({2, 1, 64, 64}, 32, 0, 1, DType::f32);
    Tensor m = randu({2, 1, 64, 64}, 33, 0, 1, DType::f32);
    auto p = sfe(e, l, m, true);
    Tensor loss = Tensor::zeros({}, DType::f32);
    for (int k = 0; k < 4; ++k) loss = add(loss, mean(mul(p.s[k], randn(p.s[k].shape(), 40 + k, DType::f32))));
    backward(loss);
    int dead = 0, total = 0;
    for (const auto& en : ps.entries()) {
        if (!en.trainable) continue;
        ++total;
        if (!en.tensor.grad().defined() || max_abs(en.tensor.grad()) == 0.0) {
            ++dead;
            MESSAGE("no gradient: " << en.name);
        }
    }
    CHECK(total > 0);
    CHECK(dead == 0);
}

TEST_CASE("zerora fuse: zero weight, composition, alpha derivative") {
    Rng rng(41);
    Conv2d conv(4, 6, 4, ConvSpec{2, 1, 1}, rng, DType::f64, false);
    BatchNorm2d bn(6, DType::f64);
    Tensor x = randn({2, 4, 8, 8}, 42), s = randn({2, 4, 8, 8}, 43);
    Tensor a0 = Tensor::zeros({1}, DType::f64);
    for (bool tr : {true, false}) {
        CHECK(zerora_fuse(x, s, a0, conv, bn, tr).bitwise_equal(relu(bn(conv(x), tr))));
        CHECK(zerora_fuse(x, Tensor(), a0, conv, bn, tr).bitwise_equal(relu(bn(conv(x), tr))));
    }
    Tensor a1 = Tensor::ones({1}, DType::f64);
    CHECK(max_abs_diff(zerora_fuse(x, s, a1, conv, bn, false), relu(bn(conv(add(x, s)), false))) <= 1e-6);

    Tensor w = randn({2, 6, 4, 4}, 44);
    auto loss = [&](const Tensor& a) { return sum(mul(zerora_fuse(x, s, a, conv, bn, true), w)); };
    Tensor a = Tensor::zeros({1}, DType::f64).requires_grad_(true);
    backward(loss(a));
    CHECK(std::abs(a.grad().item()) > 1e-3);
    CHECK(grad_check(loss, Tensor::zeros({1}, DType::f64)) <= 1e-3);

    Rng r32(41);
    Conv2d c32(4, 6, 4, ConvSpec{2, 1, 1}, r32, DType::f32, false);
    BatchNorm2d bn32(6, DType::f32);
    Tensor x32 = x.to(DType::f32), s32 = s.to(DType::f32), w32 = w.to(DType::f32);
    auto l32 = [&](const Tensor& al) { return mean(mul(zerora_fuse(x32, s32, al, c32, bn32, true), w32)); };
    CHECK(grad_check(l32, Tensor::zeros({1}, DType::f32)) <= 1e-3);

    CHECK_THROWS_AS(zerora_fuse(x, randn({2, 4, 4, 8}, 1), a1, conv, bn, true), DimensionError);
}

TEST_CASE("FTR: zero alpha ignores structure bitwise; range; composite; resolutions") {
    auto cfg = TextureConfig::tiny();
    FTR ftr(cfg, 51);
    SFE sfe(cfg, 52);
    randomize_bn(ftr.params(), 53);
    NoGradGuard ng;
    const std::int64_t S = 64;
    Tensor mask = Tensor::zeros({1, 1, S, S}, DType::f32);
    for (int y = 16; y < 40; ++y)
        for (int x = 20; x < 50; ++x) mask.set({0, 0, y, x}, 1.0);
    Tensor img = mul(randu({1, 3, S, S}, 54, -1, 1, DType::f32), add_scalar(neg(mask), 1.0));
    Tensor mpe = randn({1, cfg.mpe_channels, S, S}, 55, DType::f32);
    auto pyr = sfe(randu({1, 1, S, S}, 56, 0, 1, DType::f32), randu({1, 1, S, S}, 57, 0, 1, DType::f32), mask, false);

    for (bool tr : {false, true}) {
        auto with = ftr(img, mask, mpe, &pyr, tr);
        auto without = ftr(img, mask, mpe, nullptr, tr);
        CHECK(with.prediction.bitwise_equal(without.prediction));
        CHECK(with.composite.bitwise_equal(without.composite));
    }
    for (auto& a : ftr.alpha()) CHECK(a.item() == 0.0);

    auto out = ftr(img, mask, mpe, &pyr, false);
    CHECK(out.prediction.shape() == img.shape());
    auto pv = out.prediction.to_vector();
    CHECK(*std::min_element(pv.begin(), pv.end()) >= -1.0);
    CHECK(*std::max_element(pv.begin(), pv.end()) <= 1.0);
    auto cv = out.composite.data<float>(), iv = img.data<float>(), mv = mask.data<float>();
    bool known_exact = true;
    for (std::int64_t c = 0; c < 3; ++c)
        for (std::int64_t i = 0; i < S * S; ++i)
            if (mv[i] == 0.0f) known_exact = known_exact && cv[c * S * S + i] == iv[c * S * S + i];
    CHECK(known_exact);

    ftr.set_alpha(1.0);
    CHECK(max_abs_diff(ftr(img, mask, mpe, &pyr, false).prediction, out.prediction) > 1e-6);
    ftr.set_alpha(0.0);

    for (std::int64_t s : {256, 512}) {
        Tensor im = randu({1, 3, s, s}, 60, -1, 1, DType::f32), mk = Tensor::zeros({1, 1, s, s}, DType::f32);
        auto o = ftr(im, mk, Tensor(), nullptr, false);
        CHECK(o.prediction.shape() == im.shape());
        CHECK(o.composite.shape() == im.shape());
    }

    StructurePyramid half = sfe(randu({1, 1, 32, 32}, 1, 0, 1, DType::f32), randu({1, 1, 32, 32}, 2, 0, 1, DType::f32),
                                randu({1, 1, 32, 32}, 3, 0, 1, DType::f32), false);
    CHECK_THROWS_AS(ftr(img, mask, mpe, &half, false), DimensionError);
    CHECK_THROWS_AS(ftr(img, mask, randn({1, cfg.mpe_channels, 32, 32}, 1, DType::f32), nullptr, false), DimensionError);
    CHECK_THROWS_AS(ftr(randn({1, 3, 60, 60}, 1, DType::f32), randn({1, 1, 60, 60}, 1, DType::f32), Tensor(), nullptr, false),
                    DimensionError);
    CHECK(ftr.params().entries().size() == ftr.params(false).entries().size() + 4);
}

TEST_CASE("float64 gradient checks through SFE and FTR") {
    auto cfg = micro(DType::f64);
    SFE sfe(cfg, 71);
    FTR ftr(cfg, 72);
    ftr.set_alpha(0.7);
    const std::int64_t S = 16;
    Tensor e = randu({1, 1, S, S}, 73, 0, 1), l = randu({1, 1, S, S}, 74, 0, 1);
    Tensor mask = Tensor::zeros({1, 1, S, S}, DType::f64);
    for (int y = 4; y < 11; ++y)
        for (int x = 3; x < 12; ++x) mask.set({0, 0, y, x}, 1.0);
    Tensor img = mul(randu({1, 3, S, S}, 75, -1, 1), add_scalar(neg(mask), 1.0));
    Tensor mpe = randn({1, cfg.mpe_channels, S, S}, 76);
    Tensor w = randn({1, 3, S, S}, 77);

    auto run = [&](const Tensor& edge, const Tensor& im) {
        auto p = sfe(edge, l, mask, true);
        return sum(mul(ftr(im, mask, mpe, &p, true).prediction, w));
    };
    CHECK(grad_check([&](const Tensor& t) { return run(t, img); }, e, {0.0, 24}) <= 1e-5);
    CHECK(grad_check([&](const Tensor& t) { return run(e, t); }, img, {0.0, 24}) <= 1e-5);

    std::vector<Tensor> leaves = ftr.params().trainable();
    auto sl = sfe.params().trainable();
    leaves.insert(leaves.end(), sl.begin(), sl.end());
    CHECK(grad_check_params([&] { return run(e, img); }, leaves, {0.0, 3}) <= 1e-5);
}
