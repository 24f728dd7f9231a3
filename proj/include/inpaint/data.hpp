#pragma once

#include <cstdint>
#include <stdexcept>

#include "inpaint/mpe.hpp"
#include "inpaint/sketch.hpp"
#include "inpaint/tensor.hpp"

namespace inpaint {

/// Band unreachable within the attempt budget.
class MaskGenError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MaskGenConfig {
    std::int64_t h = 64, w = 64;
    double rate_lo = 0.10, rate_hi = 0.50;
    double blob_prob = 0.20;
    double tolerance = 0.02;
    int max_attempts = 100;
    // brush strokes, as fractions of min(h, w)
    double brush_min = 0.04, brush_max = 0.10;
    double step_min = 0.05, step_max = 0.20;
    int max_stamps = 20000;
};

struct MaskSample {
    BinaryMask mask;
    double rate = 0;
    bool blob = false;  // union with smooth blobs (segmentation-mask substitute)
    int attempts = 0;
};

/// Random-walk brush strokes, with probability blob_prob unioned with 1-3 smooth blobs; resampled
/// until the masked fraction lies in [rate_lo - tol, rate_hi + tol]. Pure function of (cfg, seed).
MaskSample generate_mask(const MaskGenConfig& cfg, std::uint64_t seed);

struct SceneConfig {
    std::int64_t size = 64;
    int quads_min = 1, quads_max = 3;
    int lines_min = 1, lines_max = 3;
    double line_width = 4.0;  // pixels at the 256 reference
    double min_contrast = 0.2;
};

/// image [1,3,S,S] in [0,1]; edge = canny(gray, default sigma for S); line = binary rasterized segments.
struct Scene {
    Tensor image, edge, line;
    LineSet lines;
};

/// Non-overlapping filled convex quads (their sides are line segments) plus border-to-border lines.
Scene synth_scene(const SceneConfig& cfg, std::uint64_t seed, DType dt = DType::f32);

/// Seed mixing for per-sample streams.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);

}  // namespace inpaint
