#include "inpaint/train.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

#include "inpaint/autograd.hpp"
#include "inpaint/ops.hpp"
#include "inpaint/optim.hpp"
#include "inpaint/serialize.hpp"

namespace inpaint {

namespace {

void require_finite(double v, std::int64_t step, const char* what) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + what + " at step " + std::to_string(step));
}

Tensor one_minus(const Tensor& m) { return add_scalar(neg(m), 1.0); }

Tensor cat0(const std::vector<Tensor>& v) { return v.size() == 1 ? v[0] : concat(v, 0); }

double mean_of(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
    double s = 0;
    for (std::size_t i = lo; i < hi; ++i) s += v[i];
    return hi > lo ? s / static_cast<double>(hi - lo) : 0.0;
}

// Held-out streams use a distinct salt so they never coincide with training samples.
constexpr std::uint64_t kHeldOut = 0x5eed0f4e1dULL;

struct TextureBatch {
    Tensor image;  // [-1,1]
    Tensor mask, masked, edge, line;
};

TextureBatch make_texture_batch(const SceneConfig& scene, const MaskGenConfig& mcfg, std::uint64_t seed, int batch, DType dt) {
    std::vector<Tensor> im, mk, ed, ln;
    for (int i = 0; i < batch; ++i) {
        auto sc = synth_scene(scene, mix_seed(seed, static_cast<std::uint64_t>(i), 1), dt);
        auto m = generate_mask(mcfg, mix_seed(seed, static_cast<std::uint64_t>(i), 2)).mask.to_tensor(dt);
        im.push_back(add_scalar(mul_scalar(sc.image, 2.0), -1.0));
        mk.push_back(m);
        ed.push_back(sc.edge);
        ln.push_back(sc.line);
    }
    TextureBatch b;
    b.image = cat0(im);
    b.mask = cat0(mk);
    b.masked = mul(b.image, one_minus(b.mask));
    b.edge = cat0(ed);
    b.line = cat0(ln);
    return b;
}

// One generator/discriminator update. FTR BN runs in batch mode unless `frozen_bn`.
LossReport texture_step(const FTR& ftr, const SFE* sfe, const PatchDiscriminator& d, const HRFExtractor& hrf, Adam& opt_g, Adam& opt_d,
                        const TextureBatch& b, const LossConfig& lc, double lr_g, double lr_d, bool frozen_bn, std::int64_t step) {
    LossReport rep;
    rep.step = step;
    Tensor p = ftr.positional(b.mask);
    StructurePyramid pyr;
    if (sfe) pyr = (*sfe)(b.edge, b.line, b.mask, true);
    Tensor pred = ftr(b.masked, b.mask, p, sfe ? &pyr : nullptr, !frozen_bn).prediction;

    // discriminator
    opt_d.zero_grad();
    {
        auto real = d(b.image);
        auto fake = d(pred.detach());
        auto [l_d, l_g_unused] = adversarial_losses(real.logits, fake.logits, b.mask);
        Tensor gp = gradient_penalty(d, b.image);
        Tensor loss_d = mul_scalar(add(l_d, mul_scalar(gp, lc.gp)), lc.adv);
        rep.l_d = l_d.item();
        rep.gp = gp.item();
        require_finite(loss_d.item(), step, "discriminator loss");
        backward(loss_d);
    }
    opt_d.step(lr_d);

    // generator
    opt_g.zero_grad();
    auto real = d(b.image);
    auto fake = d(pred);
    std::vector<Tensor> real_feats;
    for (const auto& f : real.features) real_feats.push_back(f.detach());
    Tensor l1 = l1_unmasked(pred, b.image, b.mask, lc.l1_full_grid);
    Tensor l_g = adversarial_losses(real.logits.detach(), fake.logits, b.mask).second;
    Tensor fm = feature_match_loss(real_feats, fake.features);
    Tensor hl = hrf_loss(pred, b.image, [&](const Tensor& x) { return hrf(x); });
    Tensor loss_g = add(add(mul_scalar(l1, lc.l1), mul_scalar(l_g, lc.adv)), add(mul_scalar(fm, lc.fm), mul_scalar(hl, lc.hrf)));
    rep.l1 = l1.item();
    rep.l_g = l_g.item();
    rep.fm = fm.item();
    rep.hrf = hl.item();
    require_finite(loss_g.item(), step, "generator loss");
    backward(loss_g);
    opt_g.step(lr_g);
    opt_d.zero_grad();  // the generator pass also reached the discriminator weights
    rep.finalize(lc);
    return rep;
}

std::vector<Tensor> join(std::vector<Tensor> a, const std::vector<Tensor>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

FTRTrainResult run_texture(FTR& ftr, SFE* sfe, const FTRTrainConfig& cfg) {
    const DType dt = ftr.config().dtype;
    Rng rng(mix_seed(cfg.seed, 7, 7));
    PatchDiscriminator d(3, cfg.disc_widths, rng, dt);
    HRFExtractor hrf(3, cfg.hrf_width, mix_seed(cfg.seed, 8, 8), dt);
    ParamSet pg = ftr.params(sfe != nullptr);
    std::vector<Tensor> gparams = pg.trainable();
    ParamSet ps;
    if (sfe) {
        ps = sfe->params();
        gparams = join(gparams, ps.trainable());
    }
    ParamSet pd;
    d.collect(pd, "disc");
    Adam opt_g(gparams), opt_d(pd.trainable());
    WarmupCosine sched_g{cfg.lr_g, cfg.warmup, cfg.steps}, sched_d{cfg.lr_d, cfg.warmup, cfg.steps};

    FTRTrainResult res;
    res.curve.columns = {"step", "lr_g", "l1", "l_d", "l_g", "gp", "fm", "hrf", "total"};
    res.val.columns = {"step", "psnr", "alpha0", "alpha1", "alpha2", "alpha3"};
    auto record_val = [&](std::int64_t step) {
        std::vector<double> row{static_cast<double>(step), validate_ftr(ftr, sfe, cfg)};
        for (const auto& a : ftr.alpha()) row.push_back(a.item());
        res.val.add(row);
    };
    record_val(0);
    for (std::int64_t t = 0; t < cfg.steps; ++t) {
        auto b = make_texture_batch(cfg.scene, cfg.mask, mix_seed(cfg.seed, static_cast<std::uint64_t>(t)), cfg.batch, dt);
        auto r = texture_step(ftr, sfe, d, hrf, opt_g, opt_d, b, cfg.loss, sched_g(t), sched_d(t), sfe != nullptr, t);
        res.curve.add({static_cast<double>(t), sched_g(t), r.l1, r.l_d, r.l_g, r.gp, r.fm, r.hrf, r.total});
        if (cfg.on_step) cfg.on_step(res.curve);
        if (cfg.eval_every > 0 && ((t + 1) % cfg.eval_every == 0 || t + 1 == cfg.steps)) record_val(t + 1);
    }
    return res;
}

}  // namespace

void Curve::add(std::vector<double> row) {
    if (row.size() != columns.size()) throw ContractError("curve row has " + std::to_string(row.size()) + " values for " + std::to_string(columns.size()) + " columns");
    rows.push_back(std::move(row));
}

std::vector<double> Curve::column(const std::string& name) const {
    for (std::size_t c = 0; c < columns.size(); ++c)
        if (columns[c] == name) {
            std::vector<double> out;
            for (const auto& r : rows) out.push_back(r[c]);
            return out;
        }
    throw ContractError("curve has no column " + name);
}

void Curve::write_csv(std::ostream& os) const {
    for (std::size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << columns[c];
    os << '\n';
    os.precision(10);
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) os << (c ? "," : "") << r[c];
        os << '\n';
    }
}

void Curve::save_csv(const std::filesystem::path& path) const {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot open " + path.string() + " for writing");
    write_csv(os);
}

std::vector<double> smooth(const std::vector<double>& v, std::size_t window) {
    std::vector<double> out(v.size());
    double s = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        s += v[i];
        if (i >= window) s -= v[i - window];
        out[i] = s / static_cast<double>(std::min(i + 1, window));
    }
    return out;
}

TSRBatch make_tsr_batch(const SceneConfig& scene, const MaskGenConfig& mcfg, std::uint64_t seed, int batch, DType dt) {
    auto tb = make_texture_batch(scene, mcfg, seed, batch, dt);
    TSRBatch b;
    const Tensor keep = one_minus(tb.mask);
    b.input.image = tb.masked;
    b.input.edge = mul(tb.edge, keep);
    b.input.line = mul(tb.line, keep);
    b.input.mask = tb.mask;
    b.edge_gt = tb.edge;
    b.line_gt = tb.line;
    return b;
}

TSRTrainResult train_tsr_toy(TSR& model, const TSRTrainConfig& cfg) {
    const DType dt = model.config().dtype;
    ParamSet ps = model.params();
    Adam opt(ps.trainable());
    WarmupCosine sched{cfg.lr, cfg.warmup, cfg.steps};
    TSRTrainResult res;
    res.curve.columns = {"step", "lr", "loss_edge", "loss_line", "loss"};
    for (std::int64_t t = 0; t < cfg.steps; ++t) {
        auto b = make_tsr_batch(cfg.scene, cfg.mask, mix_seed(cfg.seed, static_cast<std::uint64_t>(t)), cfg.batch, dt);
        opt.zero_grad();
        Tensor lg = model.logits(b.input.stacked());
        Tensor le = bce_logits_loss(slice(lg, 1, 0, 1), b.edge_gt), ll = bce_logits_loss(slice(lg, 1, 1, 1), b.line_gt);
        Tensor loss = add(le, ll);
        const double lv = loss.item();
        require_finite(lv, t, "structure loss");
        backward(loss);
        const double lr = sched(t);
        opt.step(lr);
        res.curve.add({static_cast<double>(t), lr, le.item(), ll.item(), lv});
        if (cfg.on_step) cfg.on_step(res.curve);
        if (cfg.ckpt_every > 0 && (t + 1) % cfg.ckpt_every == 0)
            save_checkpoint(cfg.ckpt_dir / ("tsr_step" + std::to_string(t + 1) + ".ckpt"), ps.to_named());
    }
    auto l = res.curve.column("loss");
    const std::size_t w = std::min<std::size_t>(50, l.size());
    res.initial_smoothed = mean_of(l, 0, w);
    res.final_smoothed = mean_of(l, l.size() - w, l.size());
    return res;
}

StructureEval evaluate_tsr(const TSR& model, const SceneConfig& scene, const MaskGenConfig& mask, int scenes, std::uint64_t seed) {
    NoGradGuard ng;
    StructureEval ev;
    ev.edge.finalize();
    ev.line.finalize();
    for (int i = 0; i < scenes; ++i) {
        auto b = make_tsr_batch(scene, mask, mix_seed(seed, static_cast<std::uint64_t>(i), kHeldOut), 1, model.config().dtype);
        Tensor prob = model.forward(b.input.stacked(), true);
        ev.edge += edge_line_prf(slice(prob, 1, 0, 1), b.edge_gt, b.input.mask);
        ev.line += edge_line_prf(slice(prob, 1, 1, 1), b.line_gt, b.input.mask);
    }
    return ev;
}

std::pair<Tensor, Tensor> make_ssu_pair(const SSUTrainConfig& cfg, std::uint64_t seed, DType dt) {
    Rng rng(seed);
    LineSet set;
    const int n = static_cast<int>(rng.integer(cfg.lines_min, std::max(cfg.lines_min, cfg.lines_max)));
    for (int i = 0; i < n; ++i) set.push_back({rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform(cfg.width_min, cfg.width_max)});
    return {rasterize_lines(set, cfg.size, cfg.size, true, dt), rasterize_lines(set, 2 * cfg.size, 2 * cfg.size, false, dt)};
}

Curve train_ssu(SSU& ssu, const SSUTrainConfig& cfg) {
    ParamSet ps = ssu.params();
    const DType dt = ps.entries().front().tensor.dtype();
    Adam opt(ps.trainable());
    WarmupCosine sched{cfg.lr, cfg.warmup, cfg.steps};
    Curve c;
    c.columns = {"step", "lr", "loss"};
    for (std::int64_t t = 0; t < cfg.steps; ++t) {
        std::vector<Tensor> xs, ys;
        for (int i = 0; i < cfg.batch; ++i) {
            auto [x, y] = make_ssu_pair(cfg, mix_seed(cfg.seed, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(i)), dt);
            xs.push_back(x);
            ys.push_back(y);
        }
        opt.zero_grad();
        Tensor loss = bce_logits_loss(ssu(cat0(xs)), cat0(ys));
        const double lv = loss.item();
        require_finite(lv, t, "upsampler loss");
        backward(loss);
        const double lr = sched(t);
        opt.step(lr);
        c.add({static_cast<double>(t), lr, lv});
        if (cfg.on_step) cfg.on_step(c);
    }
    return c;
}

PRF evaluate_ssu(const SSU& ssu, const SSUTrainConfig& cfg, int sets, std::uint64_t seed) {
    NoGradGuard ng;
    PRF r;
    r.finalize();
    const DType dt = ssu.params().entries().front().tensor.dtype();
    for (int i = 0; i < sets; ++i) {
        auto [x, y] = make_ssu_pair(cfg, mix_seed(seed, static_cast<std::uint64_t>(i), kHeldOut), dt);
        r += edge_line_prf(sigmoid(ssu(x)), y);
    }
    return r;
}

double validate_ftr(const FTR& ftr, const SFE* sfe, const FTRTrainConfig& cfg) {
    NoGradGuard ng;
    double total = 0;
    for (int i = 0; i < cfg.val_scenes; ++i) {
        auto b = make_texture_batch(cfg.scene, cfg.mask, mix_seed(cfg.val_seed, static_cast<std::uint64_t>(i), kHeldOut), 1, ftr.config().dtype);
        StructurePyramid pyr;
        if (sfe) pyr = (*sfe)(b.edge, b.line, b.mask, false);
        Tensor out = ftr(b.masked, b.mask, ftr.positional(b.mask), sfe ? &pyr : nullptr, false).composite;
        total += psnr(mul_scalar(add_scalar(out, 1.0), 0.5), mul_scalar(add_scalar(b.image, 1.0), 0.5));
    }
    return total / cfg.val_scenes;
}

FTRTrainResult pretrain_ftr(FTR& ftr, const FTRTrainConfig& cfg) { return run_texture(ftr, nullptr, cfg); }

FTRTrainResult finetune_zerora(FTR& ftr, SFE& sfe, const FTRTrainConfig& cfg, bool with_zerora) {
    ftr.set_alpha(with_zerora ? 0.0 : 1.0);
    return run_texture(ftr, &sfe, cfg);
}

}  // namespace inpaint
