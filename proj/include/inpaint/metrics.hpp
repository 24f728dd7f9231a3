#pragma once

#include <cstdint>

#include "inpaint/tensor.hpp"

namespace inpaint {

/// Images in [0,1]. -10 log10(MSE), 100 dB when MSE < 1e-10.
double psnr(const Tensor& pred, const Tensor& gt);

/// Mean SSIM over batch and channels: 11x11 Gaussian window (sigma 1.5) over valid positions,
/// C1 = 0.01^2, C2 = 0.03^2 for data range 1. Accepts [H,W] or [N,C,H,W] with H, W >= 11.
double ssim(const Tensor& pred, const Tensor& gt);

struct PRF {
    std::int64_t tp = 0, fp = 0, fn = 0;
    double precision = 1, recall = 1, f1 = 1;

    /// Recomputes the ratios from the counts; empty denominators count as perfect, F1 is 0 when P + R = 0.
    void finalize();
    PRF& operator+=(const PRF& o);
};

/// Binarizes both maps with value >= threshold; restricted to mask >= 0.5 when the mask is defined.
PRF edge_line_prf(const Tensor& pred, const Tensor& gt, const Tensor& mask = Tensor(), double threshold = 0.5);

}  // namespace inpaint
