#pragma once

#include <cstdint>
#include <vector>

#include "inpaint/tensor.hpp"

namespace inpaint {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam. Parameters without a gradient are skipped for that step.
class Adam {
public:
    Adam() = default;
    explicit Adam(std::vector<Tensor> params, AdamConfig cfg = {});
    void step(double lr);
    void zero_grad();
    std::int64_t steps() const { return t_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    AdamConfig cfg_;
    std::int64_t t_ = 0;
};

/// peak * t / warmup for t < warmup, then cosine decay from peak to floor at `total`.
struct WarmupCosine {
    double peak = 1e-3;
    std::int64_t warmup = 0;
    std::int64_t total = 1;
    double floor = 0.0;
    double operator()(std::int64_t t) const;
};

}  // namespace inpaint
