#include "inpaint/optim.hpp"

#include <algorithm>
#include <cmath>

namespace inpaint {

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (const auto& p : params_) {
        m_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
        v_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
    }
}

void Adam::step(double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor p = params_[i];
        Tensor g = p.grad();
        if (!g.defined()) continue;
        auto& m = m_[i];
        auto& v = v_[i];
        dispatch(p.dtype(), [&]<typename T>() {
            auto pd = p.mutable_data<T>();
            auto gd = g.data<T>();
            for (std::size_t k = 0; k < pd.size(); ++k) {
                const double gk = static_cast<double>(gd[k]);
                m[k] = cfg_.beta1 * m[k] + (1 - cfg_.beta1) * gk;
                v[k] = cfg_.beta2 * v[k] + (1 - cfg_.beta2) * gk * gk;
                pd[k] = static_cast<T>(static_cast<double>(pd[k]) - lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg_.eps));
            }
        });
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

double WarmupCosine::operator()(std::int64_t t) const {
    if (t < warmup) return peak * static_cast<double>(t) / static_cast<double>(warmup);
    const double span = static_cast<double>(std::max<std::int64_t>(1, total - warmup));
    const double u = std::clamp(static_cast<double>(t - warmup) / span, 0.0, 1.0);
    return floor + (peak - floor) * 0.5 * (1.0 + std::cos(M_PI * u));
}

}  // namespace inpaint
