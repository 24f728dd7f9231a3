#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "inpaint/data.hpp"
#include "inpaint/losses.hpp"
#include "inpaint/metrics.hpp"
#include "inpaint/sketch.hpp"
#include "inpaint/structure.hpp"
#include "inpaint/texture.hpp"

namespace inpaint {

/// Non-finite loss during training.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Column-named table of per-step values; written as CSV.
struct Curve {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void add(std::vector<double> row);
    std::vector<double> column(const std::string& name) const;
    void write_csv(std::ostream& os) const;
    void save_csv(const std::filesystem::path& path) const;
};

/// Trailing moving average; entry i averages v[max(0, i-window+1) .. i].
std::vector<double> smooth(const std::vector<double>& v, std::size_t window);

using StepCallback = std::function<void(const Curve&)>;

struct TSRBatch {
    SketchInput input;
    Tensor edge_gt, line_gt;
};

/// Masked scenes: image mapped to [-1,1], image/edge/line zeroed inside the mask.
TSRBatch make_tsr_batch(const SceneConfig& scene, const MaskGenConfig& mask, std::uint64_t seed, int batch, DType dt);

// Toy schedule from the 3-seed calibration (see README): 2 px lines at 64 px, batch 8, peak lr 8e-3.
struct TSRTrainConfig {
    std::int64_t steps = 500;
    int batch = 8;
    double lr = 8e-3;
    std::int64_t warmup = 50;
    std::uint64_t seed = 0;
    SceneConfig scene{.line_width = 8.0};
    MaskGenConfig mask;
    std::int64_t ckpt_every = 0;  // 0 disables intermediate checkpoints
    std::filesystem::path ckpt_dir;
    StepCallback on_step;
};

struct TSRTrainResult {
    Curve curve;  // step, lr, loss_edge, loss_line, loss
    double initial_smoothed = 0, final_smoothed = 0;  // window 50
};

/// Minimizes L_e + L_l (BCE from logits) over masked synthetic scenes with Adam and warmup + cosine.
TSRTrainResult train_tsr_toy(TSR& model, const TSRTrainConfig& cfg);

struct StructureEval {
    PRF edge, line;
};

/// P/R/F1 inside the mask on held-out scenes (seed stream disjoint from training), plain inference forward.
StructureEval evaluate_tsr(const TSR& model, const SceneConfig& scene, const MaskGenConfig& mask, int scenes, std::uint64_t seed);

struct SSUTrainConfig {
    std::int64_t steps = 1000;
    int batch = 4;
    double lr = 2e-3;
    std::int64_t warmup = 50;
    std::int64_t size = 64;  // input extent; targets are 2x
    int lines_min = 1, lines_max = 4;
    double width_min = 4.0, width_max = 10.0;  // at the 256 reference
    std::uint64_t seed = 0;
    StepCallback on_step;
};

/// (antialiased input at size, binary target at 2*size) for one random line set.
std::pair<Tensor, Tensor> make_ssu_pair(const SSUTrainConfig& cfg, std::uint64_t seed, DType dt = DType::f32);

/// BCE between sigmoid(logits) and the 2x rasterization, line supervision only. Columns step, lr, loss.
Curve train_ssu(SSU& ssu, const SSUTrainConfig& cfg);

/// F1 of sigmoid(logits) >= 0.5 against the binary 2x rasterization, pooled over `sets` held-out pairs.
PRF evaluate_ssu(const SSU& ssu, const SSUTrainConfig& cfg, int sets, std::uint64_t seed);

struct FTRTrainConfig {
    std::int64_t steps = 300;
    int batch = 2;
    double lr_g = 1e-3;
    double lr_d = 1e-4;
    std::int64_t warmup = 0;
    std::uint64_t seed = 0;
    SceneConfig scene;
    MaskGenConfig mask;
    LossConfig loss;
    std::vector<std::int64_t> disc_widths{16, 32, 64, 1};
    std::int64_t hrf_width = 8;
    std::int64_t eval_every = 25;
    int val_scenes = 8;
    std::uint64_t val_seed = 12345;
    StepCallback on_step;
};

struct FTRTrainResult {
    Curve curve;  // step, lr_g, l1, l_d, l_g, gp, fm, hrf, total
    Curve val;    // step, psnr, alpha0..alpha3
};

/// Mean PSNR of composites (mapped to [0,1]) over the fixed validation scenes, BN in inference mode.
/// With an SFE, ground-truth sketches of the validation scenes feed the structure pyramid.
double validate_ftr(const FTR& ftr, const SFE* sfe, const FTRTrainConfig& cfg);

/// Adversarial training of the FTR alone (BN in batch mode), losses weighted per LossConfig.
FTRTrainResult pretrain_ftr(FTR& ftr, const FTRTrainConfig& cfg);

/// Joint training of a pretrained FTR with a fresh SFE; FTR BN statistics stay frozen. Sets all alpha to
/// 0 (ZeroRA) or 1 (ablation) first. The first validation row is taken before any update.
FTRTrainResult finetune_zerora(FTR& ftr, SFE& sfe, const FTRTrainConfig& cfg, bool with_zerora);

}  // namespace inpaint
