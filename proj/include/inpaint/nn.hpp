#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "inpaint/ops.hpp"
#include "inpaint/serialize.hpp"
#include "inpaint/tensor.hpp"

namespace inpaint {

/// Parameter tree does not match a checkpoint (missing name, shape or dtype mismatch).
class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
    double normal(double mean = 0.0, double std = 1.0) { return std::normal_distribution<double>(mean, std)(gen_); }
    std::int64_t integer(std::int64_t lo, std::int64_t hi) { return std::uniform_int_distribution<std::int64_t>(lo, hi)(gen_); }
    bool bernoulli(double p) { return uniform() < p; }
    Tensor normal_tensor(Shape shape, double std, DType dt);
    Tensor uniform_tensor(Shape shape, double lo, double hi, DType dt);
    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

/// Ordered, named collection of trainable parameters and non-trainable buffers
/// (batch-norm running statistics). Tensors are shared handles into the layers.
class ParamSet {
public:
    struct Entry {
        std::string name;
        Tensor tensor;
        bool trainable;
    };

    void add(const std::string& name, Tensor t, bool trainable = true);
    std::vector<Tensor> trainable() const;
    const std::vector<Entry>& entries() const { return entries_; }
    Tensor get(const std::string& name) const;
    std::int64_t trainable_count() const;

    NamedTensors to_named() const;
    /// Copies values into the existing tensors; throws CheckpointError on any mismatch.
    void load(const NamedTensors& named);
    void zero_grad();

private:
    std::vector<Entry> entries_;
};

/// Cross-correlation layer; weights ~ N(0, 2/fan_in), bias zero.
struct Conv2d {
    Tensor weight;
    Tensor bias;
    ConvSpec spec;

    Conv2d() = default;
    Conv2d(std::int64_t in, std::int64_t out, int kernel, ConvSpec spec, Rng& rng, DType dt, bool with_bias = true);
    Tensor operator()(const Tensor& x) const { return conv2d(x, weight, bias, spec); }
    void collect(ParamSet& ps, const std::string& prefix) const;
};

struct ConvTranspose2d {
    Tensor weight;  // [in, out, k, k]
    Tensor bias;
    ConvSpec spec;
    int output_padding = 0;

    ConvTranspose2d() = default;
    ConvTranspose2d(std::int64_t in, std::int64_t out, int kernel, ConvSpec spec, Rng& rng, DType dt, int output_padding = 0);
    Tensor operator()(const Tensor& x) const { return conv_transpose2d(x, weight, bias, spec, output_padding); }
    void collect(ParamSet& ps, const std::string& prefix) const;
};

struct BatchNorm2d {
    Tensor gamma;
    Tensor beta;
    mutable BatchNormState state;

    BatchNorm2d() = default;
    BatchNorm2d(std::int64_t channels, DType dt);
    Tensor operator()(const Tensor& x, bool training) const { return batch_norm2d(x, gamma, beta, state, training); }
    void collect(ParamSet& ps, const std::string& prefix) const;
};

struct LayerNorm {
    Tensor gamma;
    Tensor beta;
    double eps = 1e-5;

    LayerNorm() = default;
    LayerNorm(std::int64_t dim, DType dt);
    Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma, beta, eps); }
    void collect(ParamSet& ps, const std::string& prefix) const;
};

/// y = x W + b over the last axis; W is [in, out].
struct Linear {
    Tensor weight;
    Tensor bias;

    Linear() = default;
    Linear(std::int64_t in, std::int64_t out, Rng& rng, DType dt, bool with_bias = true);
    Tensor operator()(const Tensor& x) const;
    void collect(ParamSet& ps, const std::string& prefix) const;
};

}  // namespace inpaint
