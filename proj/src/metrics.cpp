#include "inpaint/metrics.hpp"

#include <cmath>
#include <vector>

namespace inpaint {

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) throw DimensionError(std::string(what) + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace

double psnr(const Tensor& pred, const Tensor& gt) {
    require_same(pred, gt, "psnr");
    auto p = pred.to_vector(), g = gt.to_vector();
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - g[i]) * (p[i] - g[i]);
    const double mse = s / static_cast<double>(p.size());
    return mse < 1e-10 ? 100.0 : -10.0 * std::log10(mse);
}

double ssim(const Tensor& pred, const Tensor& gt) {
    require_same(pred, gt, "ssim");
    std::int64_t planes, H, W;
    if (pred.rank() == 2) {
        planes = 1, H = pred.size(0), W = pred.size(1);
    } else if (pred.rank() == 4) {
        planes = pred.size(0) * pred.size(1), H = pred.size(2), W = pred.size(3);
    } else {
        throw DimensionError("ssim expects [H,W] or [N,C,H,W], got " + shape_str(pred.shape()));
    }
    constexpr int K = 11, R = 5;
    if (H < K || W < K) throw DimensionError("ssim needs extents >= 11, got " + shape_str(pred.shape()));
    std::vector<double> g1(K);
    double z = 0;
    for (int i = 0; i < K; ++i) z += g1[i] = std::exp(-0.5 * (i - R) * (i - R) / (1.5 * 1.5));
    for (auto& v : g1) v /= z;
    const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
    auto pv = pred.to_vector(), gv = gt.to_vector();
    double total = 0;
    std::int64_t count = 0;
    for (std::int64_t p = 0; p < planes; ++p) {
        const double* a = pv.data() + p * H * W;
        const double* b = gv.data() + p * H * W;
        for (std::int64_t y = R; y < H - R; ++y)
            for (std::int64_t x = R; x < W - R; ++x) {
                double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (int i = 0; i < K; ++i)
                    for (int j = 0; j < K; ++j) {
                        const double w = g1[i] * g1[j];
                        const double u = a[(y + i - R) * W + x + j - R], v = b[(y + i - R) * W + x + j - R];
                        ma += w * u;
                        mb += w * v;
                        saa += w * u * u;
                        sbb += w * v * v;
                        sab += w * u * v;
                    }
                const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
                total += ((2 * ma * mb + C1) * (2 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
                ++count;
            }
    }
    return total / static_cast<double>(count);
}

void PRF::finalize() {
    precision = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    recall = tp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    f1 = precision + recall == 0 ? 0.0 : 2 * precision * recall / (precision + recall);
}

PRF& PRF::operator+=(const PRF& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    finalize();
    return *this;
}

PRF edge_line_prf(const Tensor& pred, const Tensor& gt, const Tensor& mask, double threshold) {
    require_same(pred, gt, "prf");
    if (mask.defined() && mask.numel() != pred.numel()) {
        // a one-channel mask broadcasts over the channels of [N,C,H,W] maps
        if (!(mask.rank() == 4 && pred.rank() == 4 && mask.size(1) == 1 && mask.size(0) == pred.size(0) && mask.size(2) == pred.size(2) &&
              mask.size(3) == pred.size(3)))
            throw DimensionError("prf: mask " + shape_str(mask.shape()) + " does not match " + shape_str(pred.shape()));
    }
    auto p = pred.to_vector(), g = gt.to_vector();
    std::vector<double> m = mask.defined() ? mask.to_vector() : std::vector<double>();
    const std::int64_t plane = pred.rank() == 4 ? pred.size(2) * pred.size(3) : 0;
    const std::int64_t C = pred.rank() == 4 ? pred.size(1) : 1;
    PRF r;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!m.empty()) {
            std::size_t mi = i;
            if (m.size() != p.size()) mi = static_cast<std::size_t>((static_cast<std::int64_t>(i) / (C * plane)) * plane + static_cast<std::int64_t>(i) % plane);
            if (m[mi] < 0.5) continue;
        }
        const bool a = p[i] >= threshold, b = g[i] >= threshold;
        r.tp += a && b;
        r.fp += a && !b;
        r.fn += !a && b;
    }
    r.finalize();
    return r;
}

}  // namespace inpaint
