#include "inpaint/nn.hpp"

#include <cmath>

namespace inpaint {

Tensor Rng::normal_tensor(Shape shape, double std, DType dt) {
    Tensor t(std::move(shape), dt);
    dispatch(dt, [&]<typename T>() {
        for (auto& v : t.mutable_data<T>()) v = static_cast<T>(normal(0.0, std));
    });
    return t;
}

Tensor Rng::uniform_tensor(Shape shape, double lo, double hi, DType dt) {
    Tensor t(std::move(shape), dt);
    dispatch(dt, [&]<typename T>() {
        for (auto& v : t.mutable_data<T>()) v = static_cast<T>(uniform(lo, hi));
    });
    return t;
}

void ParamSet::add(const std::string& name, Tensor t, bool trainable) {
    if (!t.defined()) return;
    for (const auto& e : entries_)
        if (e.name == name) throw ContractError("duplicate parameter name " + name);
    if (trainable) t.requires_grad_(true);
    entries_.push_back({name, std::move(t), trainable});
}

std::vector<Tensor> ParamSet::trainable() const {
    std::vector<Tensor> out;
    for (const auto& e : entries_)
        if (e.trainable) out.push_back(e.tensor);
    return out;
}

Tensor ParamSet::get(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return e.tensor;
    throw CheckpointError("no parameter named " + name);
}

std::int64_t ParamSet::trainable_count() const {
    std::int64_t n = 0;
    for (const auto& e : entries_)
        if (e.trainable) n += e.tensor.numel();
    return n;
}

NamedTensors ParamSet::to_named() const {
    NamedTensors out;
    for (const auto& e : entries_) out.emplace_back(e.name, e.tensor.detach());
    return out;
}

void ParamSet::load(const NamedTensors& named) {
    for (auto& e : entries_) {
        const Tensor* src = nullptr;
        for (const auto& [n, t] : named)
            if (n == e.name) src = &t;
        if (!src) throw CheckpointError("checkpoint is missing parameter " + e.name);
        if (src->shape() != e.tensor.shape())
            throw CheckpointError("parameter " + e.name + " has shape " + shape_str(src->shape()) + ", model expects " + shape_str(e.tensor.shape()));
        if (src->dtype() != e.tensor.dtype())
            throw CheckpointError("parameter " + e.name + " has dtype " + dtype_name(src->dtype()) + ", model expects " + dtype_name(e.tensor.dtype()));
        dispatch(e.tensor.dtype(), [&]<typename T>() {
            auto s = src->data<T>();
            std::copy(s.begin(), s.end(), e.tensor.mutable_data<T>().begin());
        });
    }
}

void ParamSet::zero_grad() {
    for (auto& e : entries_) e.tensor.zero_grad();
}

Conv2d::Conv2d(std::int64_t in, std::int64_t out, int kernel, ConvSpec s, Rng& rng, DType dt, bool with_bias) : spec(s) {
    const double fan_in = static_cast<double>(in * kernel * kernel);
    weight = rng.normal_tensor({out, in, kernel, kernel}, std::sqrt(2.0 / fan_in), dt);
    if (with_bias) bias = Tensor::zeros({out}, dt);
}

void Conv2d::collect(ParamSet& ps, const std::string& prefix) const {
    ps.add(prefix + ".weight", weight);
    ps.add(prefix + ".bias", bias);
}

ConvTranspose2d::ConvTranspose2d(std::int64_t in, std::int64_t out, int kernel, ConvSpec s, Rng& rng, DType dt, int op)
    : spec(s), output_padding(op) {
    const double fan_in = static_cast<double>(in * kernel * kernel) / static_cast<double>(s.stride * s.stride);
    weight = rng.normal_tensor({in, out, kernel, kernel}, std::sqrt(2.0 / fan_in), dt);
    bias = Tensor::zeros({out}, dt);
}

void ConvTranspose2d::collect(ParamSet& ps, const std::string& prefix) const {
    ps.add(prefix + ".weight", weight);
    ps.add(prefix + ".bias", bias);
}

BatchNorm2d::BatchNorm2d(std::int64_t channels, DType dt)
    : gamma(Tensor::ones({channels}, dt)), beta(Tensor::zeros({channels}, dt)) {
    state.running_mean = Tensor::zeros({channels}, dt);
    state.running_var = Tensor::ones({channels}, dt);
}

void BatchNorm2d::collect(ParamSet& ps, const std::string& prefix) const {
    ps.add(prefix + ".gamma", gamma);
    ps.add(prefix + ".beta", beta);
    ps.add(prefix + ".running_mean", state.running_mean, false);
    ps.add(prefix + ".running_var", state.running_var, false);
}

LayerNorm::LayerNorm(std::int64_t dim, DType dt) : gamma(Tensor::ones({dim}, dt)), beta(Tensor::zeros({dim}, dt)) {}

void LayerNorm::collect(ParamSet& ps, const std::string& prefix) const {
    ps.add(prefix + ".gamma", gamma);
    ps.add(prefix + ".beta", beta);
}

Linear::Linear(std::int64_t in, std::int64_t out, Rng& rng, DType dt, bool with_bias) {
    weight = rng.normal_tensor({in, out}, std::sqrt(2.0 / static_cast<double>(in)), dt);
    if (with_bias) bias = Tensor::zeros({out}, dt);
}

Tensor Linear::operator()(const Tensor& x) const {
    const std::int64_t in = weight.size(0);
    if (x.size(-1) != in) throw DimensionError("linear: input " + shape_str(x.shape()) + " does not end in " + std::to_string(in));
    Shape oshape = x.shape();
    oshape.back() = weight.size(1);
    Tensor y = matmul(reshape(x, {x.numel() / in, in}), weight);
    if (bias.defined()) y = add(y, bias);
    return reshape(y, oshape);
}

void Linear::collect(ParamSet& ps, const std::string& prefix) const {
    ps.add(prefix + ".weight", weight);
    ps.add(prefix + ".bias", bias);
}

}  // namespace inpaint
