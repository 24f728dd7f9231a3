#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "inpaint/autograd.hpp"
#include "inpaint/data.hpp"
#include "inpaint/image_io.hpp"
#include "inpaint/metrics.hpp"
#include "inpaint/mpe.hpp"
#include "inpaint/ops.hpp"
#include "inpaint/serialize.hpp"
#include "inpaint/sketch.hpp"
#include "inpaint/structure.hpp"
#include "inpaint/texture.hpp"
#include "inpaint/train.hpp"

namespace fs = std::filesystem;
using namespace inpaint;
using json = nlohmann::json;

namespace {

enum Exit { kOk = 0, kInput = 2, kCheckpoint = 3, kNumeric = 4 };

// Input problems the library does not classify itself.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Global {
    std::uint64_t seed = 0;
    std::string preset = "tiny";
    fs::path out = "out";
};

std::pair<std::int64_t, std::int64_t> parse_hw(const std::string& s) {
    std::int64_t h = 0, w = 0;
    char x = 0, extra = 0;
    if (std::sscanf(s.c_str(), "%ld%c%ld%c", &h, &x, &w, &extra) != 3 || (x != 'x' && x != 'X') || h <= 0 || w <= 0)
        throw InputError("expected HxW, got '" + s + "'");
    return {h, w};
}

// ParamSet entries share storage with the model, so loading into a copy fills the model.
void load_into(ParamSet ps, const fs::path& path) {
    NamedTensors named;
    try {
        named = load_checkpoint(path);
    } catch (const FormatError& e) {
        throw CheckpointError(path.string() + ": " + e.what());
    }
    ps.load(named);
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream os(path);
    os << j.dump(2) << "\n";
}

Image8 gray_of(const Tensor& t01) { return tensor_to_image(t01, true); }

TSRConfig tsr_preset(const std::string& p) {
    if (p == "paper-shape") return TSRConfig::paper();
    return p == "toy" ? TSRConfig::toy() : TSRConfig::tiny();
}
TextureConfig texture_preset(const std::string& p) { return p == "paper-shape" ? TextureConfig::paper() : TextureConfig::tiny(); }
std::int64_t ssu_width(const std::string& p) { return p == "paper-shape" ? 64 : 16; }

json shape_report(const ParamSet& ps) {
    json j = json::object();
    for (const auto& e : ps.entries()) j[e.name] = e.tensor.shape();
    return j;
}

// ---- mpe ----

struct MpeArgs {
    fs::path mask, ckpt;
    int d = 64, dmax = 128;
    std::string resize;
};

int cmd_mpe(const Global& g, const MpeArgs& a) {
    Tensor m = read_mask_png(a.mask);
    BinaryMask bm = BinaryMask::from_tensor(m);
    MPEConfig cfg;
    cfg.d = a.d;
    cfg.d_max = a.dmax;
    DistanceMap dist = masking_distance(bm);
    DirectionMap dir = masking_direction(bm);
    MPEOutput out;
    out.p_dis = sinusoidal_encode(dist, cfg);
    if (!a.ckpt.empty()) {
        Rng rng(g.seed);
        MPE mpe(cfg, rng, DType::f32);
        ParamSet ps;
        mpe.collect(ps, "mpe");
        NamedTensors named;
        try {
            named = load_checkpoint(a.ckpt);
        } catch (const FormatError& e) {
            throw CheckpointError(a.ckpt.string() + ": " + e.what());
        }
        // FTR checkpoints carry the table under their own prefix.
        for (auto& [n, t] : named)
            if (n == "ftr.mpe.w_dir") n = "mpe.w_dir";
        ps.load(named);
        out.p_dir = embed_direction(dir, mpe.w_dir);
    }
    if (!a.resize.empty()) {
        auto [h, w] = parse_hw(a.resize);
        out = resize_mpe(out, h, w);
    }
    fs::create_directories(g.out);
    save_zten(g.out / "distance.zten", dist.to_tensor());
    save_zten(g.out / "direction.zten", dir.to_tensor());
    save_zten(g.out / "p_dis.zten", out.p_dis);
    if (out.p_dir.defined()) save_zten(g.out / "p_dir.zten", out.p_dir);

    Tensor d = dist.to_tensor();
    double dmax = 1.0;
    for (double v : d.to_vector()) dmax = std::max(dmax, v);
    write_png(g.out / "distance.png", gray_of(mul_scalar(d, 1.0 / dmax)));
    // Direction bits packed as up=1, down=2, left=4, right=8, scaled by 17 to fill 0..255.
    Image8 di{static_cast<int>(dir.w), static_cast<int>(dir.h), 1, {}};
    di.pixels.resize(static_cast<std::size_t>(dir.w * dir.h));
    for (std::size_t p = 0; p < di.pixels.size(); ++p) {
        int v = 0;
        for (int k = 0; k < 4; ++k) v |= dir.bits[p * 4 + k] << k;
        di.pixels[p] = static_cast<std::uint8_t>(v * 17);
    }
    write_png(g.out / "direction.png", di);
    return kOk;
}

// ---- tsr ----

struct TsrArgs {
    fs::path image, mask, edge, lines, ckpt;
    int iters = 5;
    bool debug = false;
};

int cmd_tsr(const Global& g, const TsrArgs& a) {
    if (g.preset == "paper-shape") throw InputError("tsr inference needs the tiny or toy preset");
    TSR model(tsr_preset(g.preset), g.seed);
    load_into(model.params(), a.ckpt);
    const auto S = model.config().image_size;

    Tensor img = image_to_tensor(read_png(a.image, 3), true);
    Tensor mask = read_mask_png(a.mask);
    if (img.size(2) != S || img.size(3) != S || mask.size(2) != S || mask.size(3) != S)
        throw InputError("model expects " + std::to_string(S) + "x" + std::to_string(S) + " image and mask");
    Tensor keep = add_scalar(neg(mask), 1.0);
    Tensor edge = a.edge.empty() ? canny(mean(img, 1, true), CannyOptions{canny_default_sigma(S)})
                                 : image_to_tensor(read_png(a.edge, 1), true);
    Tensor line = a.lines.empty() ? Tensor::zeros({1, 1, S, S}) : rasterize_lines(load_lines(a.lines), S, S, false);
    SketchInput in{mul(add_scalar(mul_scalar(img, 2.0), -1.0), keep), mul(edge, keep), mul(line, keep), mask};
    MaskPredictResult r = mask_predict(model, in, a.iters);

    fs::create_directories(g.out);
    write_png(g.out / "edge.png", gray_of(r.output.edge));
    write_png(g.out / "line.png", gray_of(r.output.line));
    if (a.debug)
        for (std::size_t t = 0; t < r.confidence.size(); ++t) {
            write_png(g.out / ("confidence_edge_" + std::to_string(t + 1) + ".png"), gray_of(slice(r.confidence[t], 1, 0, 1)));
            write_png(g.out / ("confidence_line_" + std::to_string(t + 1) + ".png"), gray_of(slice(r.confidence[t], 1, 1, 1)));
        }
    json j{{"iterations", a.iters}, {"committed_edge", r.committed_edge}, {"committed_line", r.committed_line}};
    write_json(g.out / "tsr.json", j);
    return kOk;
}

// ---- upsample ----

struct UpArgs {
    fs::path map, ckpt;
    std::string target;
    double gamma = 2.0, beta = 2.0;
};

int cmd_upsample(const Global& g, const UpArgs& a) {
    auto [th, tw] = parse_hw(a.target);
    Tensor m = image_to_tensor(read_png(a.map, 1), true);
    if (th < m.size(2) || tw < m.size(3)) throw InputError("target " + a.target + " is smaller than the source map");
    NamedTensors named;
    try {
        named = load_checkpoint(a.ckpt);
    } catch (const FormatError& e) {
        throw CheckpointError(a.ckpt.string() + ": " + e.what());
    }
    std::int64_t width = -1;
    for (const auto& [n, t] : named)
        if (n == "ssu.c1.weight") width = t.size(0);
    if (width < 0) throw CheckpointError("checkpoint has no ssu.c1.weight");
    SSU ssu(width, g.seed);
    ssu.params().load(named);
    Tensor up;
    {
        NoGradGuard ng;
        up = upsample_iterative(ssu, m, SSUConfig{a.gamma, a.beta}, th, tw);
    }
    fs::create_directories(g.out);
    write_png(g.out / "upsampled.png", gray_of(up));
    save_zten(g.out / "upsampled.zten", up);
    return kOk;
}

// ---- train / finetune ----

struct TrainArgs {
    std::string model = "tsr";
    std::int64_t steps = -1;
    std::int64_t ckpt_every = 0;
    std::string init;
};

void report_curve(const Curve& c, std::ostream& os) {
    // Streams the newest row; the header goes out with the first one.
    if (c.rows.size() == 1) {
        for (std::size_t i = 0; i < c.columns.size(); ++i) os << (i ? "," : "") << c.columns[i];
        os << "\n";
    }
    const auto& r = c.rows.back();
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
    os << "\n";
}

int paper_shapes(const Global& g, const ParamSet& ps) {
    fs::create_directories(g.out);
    json j{{"preset", "paper-shape"}, {"trainable", ps.trainable_count()}, {"shapes", shape_report(ps)}};
    write_json(g.out / "shapes.json", j);
    std::cout << "paper-shape parameter tree: " << ps.trainable_count() << " trainable values (no training)\n";
    return kOk;
}

int cmd_train(const Global& g, const TrainArgs& a) {
    const bool paper = g.preset == "paper-shape";
    fs::create_directories(g.out);
    json summary{{"model", a.model}, {"seed", g.seed}, {"preset", g.preset}};
    if (a.model == "tsr") {
        TSR model(tsr_preset(g.preset), g.seed);
        if (paper) return paper_shapes(g, model.params());
        if (!a.init.empty()) load_into(model.params(), a.init);
        TSRTrainConfig cfg;
        cfg.seed = g.seed;
        if (a.steps >= 0) cfg.steps = a.steps;
        cfg.ckpt_every = a.ckpt_every;
        cfg.ckpt_dir = g.out;
        if (cfg.steps == 0) {
            save_checkpoint(g.out / "tsr.ckpt", model.params().to_named());
            return kOk;
        }
        cfg.on_step = [](const Curve& c) { report_curve(c, std::cout); };
        auto r = train_tsr_toy(model, cfg);
        r.curve.save_csv(g.out / "loss.csv");
        save_checkpoint(g.out / "tsr.ckpt", model.params().to_named());
        auto ev = evaluate_tsr(model, cfg.scene, cfg.mask, 64, g.seed);
        summary["initial_smoothed"] = r.initial_smoothed;
        summary["final_smoothed"] = r.final_smoothed;
        summary["masked_line_f1"] = ev.line.f1;
        summary["masked_edge_f1"] = ev.edge.f1;
    } else if (a.model == "ssu") {
        SSU ssu(ssu_width(g.preset), g.seed);
        if (paper) return paper_shapes(g, ssu.params());
        if (!a.init.empty()) load_into(ssu.params(), a.init);
        SSUTrainConfig cfg;
        cfg.seed = g.seed;
        if (a.steps >= 0) cfg.steps = a.steps;
        if (cfg.steps == 0) {
            save_checkpoint(g.out / "ssu.ckpt", ssu.params().to_named());
            return kOk;
        }
        cfg.on_step = [](const Curve& c) { report_curve(c, std::cout); };
        Curve c = train_ssu(ssu, cfg);
        c.save_csv(g.out / "loss.csv");
        save_checkpoint(g.out / "ssu.ckpt", ssu.params().to_named());
        summary["f1"] = evaluate_ssu(ssu, cfg, 64, g.seed).f1;
    } else if (a.model == "ftr") {
        FTR ftr(texture_preset(g.preset), g.seed);
        if (paper) return paper_shapes(g, ftr.params());
        if (!a.init.empty()) load_into(ftr.params(), a.init);
        FTRTrainConfig cfg;
        cfg.seed = g.seed;
        if (a.steps >= 0) cfg.steps = a.steps;
        if (cfg.steps == 0) {
            save_checkpoint(g.out / "ftr.ckpt", ftr.params().to_named());
            return kOk;
        }
        cfg.on_step = [](const Curve& c) { report_curve(c, std::cout); };
        auto r = pretrain_ftr(ftr, cfg);
        r.curve.save_csv(g.out / "loss.csv");
        r.val.save_csv(g.out / "val.csv");
        save_checkpoint(g.out / "ftr.ckpt", ftr.params().to_named());
        summary["final_psnr"] = r.val.rows.back()[1];
    } else {
        throw InputError("unknown model '" + a.model + "' (tsr, ssu, ftr)");
    }
    write_json(g.out / "summary.json", summary);
    return kOk;
}

struct FinetuneArgs {
    fs::path ckpt;
    std::int64_t steps = -1;
    bool no_zerora = false;
};

int cmd_finetune(const Global& g, const FinetuneArgs& a) {
    const auto tc = texture_preset(g.preset);
    FTR ftr(tc, g.seed);
    SFE sfe(tc, g.seed + 1);
    if (g.preset == "paper-shape") {
        ParamSet ps = ftr.params();
        for (const auto& e : sfe.params().entries()) ps.add(e.name, e.tensor, e.trainable);
        return paper_shapes(g, ps);
    }
    load_into(ftr.params(), a.ckpt);
    FTRTrainConfig cfg;
    cfg.seed = g.seed;
    cfg.lr_g = 3e-4;
    if (a.steps >= 0) cfg.steps = a.steps;
    fs::create_directories(g.out);
    if (cfg.steps == 0) {
        ftr.set_alpha(a.no_zerora ? 1.0 : 0.0);
        save_checkpoint(g.out / "ftr.ckpt", ftr.params().to_named());
        save_checkpoint(g.out / "sfe.ckpt", sfe.params().to_named());
        return kOk;
    }
    cfg.on_step = [](const Curve& c) { report_curve(c, std::cout); };
    auto r = finetune_zerora(ftr, sfe, cfg, !a.no_zerora);
    r.curve.save_csv(g.out / "loss.csv");
    r.val.save_csv(g.out / "val.csv");
    save_checkpoint(g.out / "ftr.ckpt", ftr.params().to_named());
    save_checkpoint(g.out / "sfe.ckpt", sfe.params().to_named());
    json alphas = json::array();
    for (const auto& al : ftr.alpha()) alphas.push_back(al.item());
    write_json(g.out / "summary.json", json{{"with_zerora", !a.no_zerora}, {"alpha", alphas},
                                            {"psnr_start", r.val.rows.front()[1]}, {"psnr_end", r.val.rows.back()[1]}});
    return kOk;
}

// ---- genmask / synth / metrics ----

struct GenmaskArgs {
    int count = 1;
    std::int64_t size = 64;
    double lo = 0.1, hi = 0.5;
};

int cmd_genmask(const Global& g, const GenmaskArgs& a) {
    MaskGenConfig cfg;
    cfg.h = cfg.w = a.size;
    cfg.rate_lo = a.lo;
    cfg.rate_hi = a.hi;
    fs::create_directories(g.out);
    std::ofstream csv(g.out / "masks.csv");
    csv << "index,rate,blob,attempts\n";
    for (int i = 0; i < a.count; ++i) {
        MaskSample s = generate_mask(cfg, mix_seed(g.seed, static_cast<std::uint64_t>(i)));
        char name[32];
        std::snprintf(name, sizeof name, "mask_%04d.png", i);
        write_mask_png(g.out / name, s.mask.to_tensor());
        csv << i << "," << s.rate << "," << (s.blob ? 1 : 0) << "," << s.attempts << "\n";
    }
    return kOk;
}

struct SynthArgs {
    int count = 1;
    std::int64_t size = 64;
};

int cmd_synth(const Global& g, const SynthArgs& a) {
    SceneConfig cfg;
    cfg.size = a.size;
    fs::create_directories(g.out);
    for (int i = 0; i < a.count; ++i) {
        Scene s = synth_scene(cfg, mix_seed(g.seed, static_cast<std::uint64_t>(i)));
        char stem[32];
        std::snprintf(stem, sizeof stem, "scene_%04d", i);
        const std::string st = stem;
        write_png(g.out / (st + "_image.png"), tensor_to_image(s.image, true));
        write_png(g.out / (st + "_edge.png"), gray_of(s.edge));
        write_png(g.out / (st + "_line.png"), gray_of(s.line));
        save_lines(g.out / (st + "_lines.txt"), s.lines);
    }
    return kOk;
}

struct MetricsArgs {
    fs::path pred, gt, mask;
    double threshold = 0.5;
    bool sketch = false;
};

int cmd_metrics(const Global& g, const MetricsArgs& a) {
    json j;
    if (a.sketch) {
        Tensor p = image_to_tensor(read_png(a.pred, 1), true), t = image_to_tensor(read_png(a.gt, 1), true);
        Tensor m = a.mask.empty() ? Tensor() : read_mask_png(a.mask);
        PRF r = edge_line_prf(p, t, m, a.threshold);
        j = {{"tp", r.tp}, {"fp", r.fp}, {"fn", r.fn}, {"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1}};
    } else {
        Tensor p = image_to_tensor(read_png(a.pred, 3), true), t = image_to_tensor(read_png(a.gt, 3), true);
        j = {{"psnr", psnr(p, t)}, {"ssim", ssim(p, t)}};
    }
    std::cout << j.dump(2) << "\n";
    fs::create_directories(g.out);
    write_json(g.out / "metrics.json", j);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sketch-guided inpainting toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value config file with [subcommand] sections");
    Global g;
    app.add_option("--seed", g.seed, "global seed")->capture_default_str();
    app.add_option("--preset", g.preset, "tiny, toy (wider TSR) or paper-shape")->check(CLI::IsMember({"tiny", "toy", "paper-shape"}))->capture_default_str();
    app.add_option("--out", g.out, "output directory")->capture_default_str();

    MpeArgs mpe;
    auto* s_mpe = app.add_subcommand("mpe", "masking positional encoding maps");
    s_mpe->add_option("--mask", mpe.mask, "mask PNG (>=128 is masked)")->required();
    s_mpe->add_option("--d", mpe.d, "encoding channels")->capture_default_str();
    s_mpe->add_option("--dmax", mpe.dmax, "distance clip")->capture_default_str();
    s_mpe->add_option("--resize", mpe.resize, "HxW output size");
    s_mpe->add_option("--ckpt", mpe.ckpt, "checkpoint holding mpe.w_dir or ftr.mpe.w_dir");

    TsrArgs tsr;
    auto* s_tsr = app.add_subcommand("tsr", "structure restoration with mask-predict");
    s_tsr->add_option("--image", tsr.image, "RGB PNG")->required();
    s_tsr->add_option("--mask", tsr.mask, "mask PNG")->required();
    s_tsr->add_option("--edge", tsr.edge, "edge PNG (default: canny of the image)");
    s_tsr->add_option("--lines", tsr.lines, "line-set text file");
    s_tsr->add_option("--ckpt", tsr.ckpt, "TSR checkpoint")->required();
    s_tsr->add_option("--iters", tsr.iters, "mask-predict iterations")->capture_default_str();
    s_tsr->add_flag("--debug", tsr.debug, "write per-iteration confidence maps");

    UpArgs up;
    auto* s_up = app.add_subcommand("upsample", "iterative structure upsampling");
    s_up->add_option("--map", up.map, "grayscale sketch PNG")->required();
    s_up->add_option("--ckpt", up.ckpt, "SSU checkpoint")->required();
    s_up->add_option("--target", up.target, "HxW")->required();
    s_up->add_option("--gamma", up.gamma)->capture_default_str();
    s_up->add_option("--beta", up.beta)->capture_default_str();

    TrainArgs tr;
    auto* s_train = app.add_subcommand("train", "toy training (tsr, ssu, ftr)");
    s_train->add_option("--model", tr.model)->check(CLI::IsMember({"tsr", "ssu", "ftr"}))->capture_default_str();
    s_train->add_option("--steps", tr.steps, "steps (default: per-model toy schedule)");
    s_train->add_option("--ckpt-every", tr.ckpt_every, "intermediate checkpoints (tsr)")->capture_default_str();
    s_train->add_option("--init", tr.init, "start from a checkpoint");

    FinetuneArgs ft;
    auto* s_ft = app.add_subcommand("finetune", "joint FTR + SFE finetuning");
    s_ft->add_option("--ckpt", ft.ckpt, "pretrained FTR checkpoint");
    s_ft->add_option("--steps", ft.steps);
    s_ft->add_flag("--no-zerora", ft.no_zerora, "ablation: start with alpha = 1");

    GenmaskArgs gm;
    auto* s_gm = app.add_subcommand("genmask", "random training masks");
    s_gm->add_option("--count", gm.count)->capture_default_str();
    s_gm->add_option("--size", gm.size)->capture_default_str();
    s_gm->add_option("--rate-lo", gm.lo)->capture_default_str();
    s_gm->add_option("--rate-hi", gm.hi)->capture_default_str();

    SynthArgs sy;
    auto* s_sy = app.add_subcommand("synth", "synthetic scenes with edge/line ground truth");
    s_sy->add_option("--count", sy.count)->capture_default_str();
    s_sy->add_option("--size", sy.size)->capture_default_str();

    MetricsArgs me;
    auto* s_me = app.add_subcommand("metrics", "PSNR/SSIM, or P/R/F1 with --sketch");
    s_me->add_option("--pred", me.pred)->required();
    s_me->add_option("--gt", me.gt)->required();
    s_me->add_option("--mask", me.mask, "restrict P/R/F1 to the masked region");
    s_me->add_option("--threshold", me.threshold)->capture_default_str();
    s_me->add_flag("--sketch", me.sketch, "treat inputs as grayscale sketch maps");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kInput;
    }

    try {
        fs::create_directories(g.out);
        {
            // Keep the global keys and those of the subcommand that ran; the dump reads back via --config.
            const std::string active = app.get_subcommands().front()->get_name() + ".";
            std::istringstream all(app.config_to_str(true, false));
            std::ofstream dump(g.out / "effective_config.ini");
            for (std::string line; std::getline(all, line);) {
                const auto eq = line.find('='), dot = line.find('.');
                if (dot == std::string::npos || dot > eq || line.rfind(active, 0) == 0) dump << line << "\n";
            }
        }
        if (*s_mpe) return cmd_mpe(g, mpe);
        if (*s_tsr) return cmd_tsr(g, tsr);
        if (*s_up) return cmd_upsample(g, up);
        if (*s_train) return cmd_train(g, tr);
        if (*s_ft) {
            if (ft.ckpt.empty() && g.preset != "paper-shape") throw InputError("finetune needs --ckpt");
            return cmd_finetune(g, ft);
        }
        if (*s_gm) return cmd_genmask(g, gm);
        if (*s_sy) return cmd_synth(g, sy);
        if (*s_me) return cmd_metrics(g, me);
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return kCheckpoint;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kInput;
    }
    return kOk;
}
