#pragma once

#include <functional>
#include <string>
#include <vector>

#include "inpaint/tensor.hpp"

namespace inpaint {

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

bool grad_enabled();

namespace autograd {

/// True when recording is on and at least one input participates in autodiff.
bool needs_graph(std::initializer_list<const Tensor*> inputs);
bool needs_graph(const std::vector<Tensor>& inputs);

/// Attaches a producer node to `out`. Inputs that do not require grad are kept
/// in the list but never receive accumulation.
void record(Tensor& out, const std::vector<Tensor>& inputs, detail::BackwardFn fn, const char* name);

/// Number of nodes visited by the most recent backward() on this thread.
std::size_t last_backward_node_count();

}  // namespace autograd

/// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
/// tensor that requires grad; the recorded graph is released afterwards.
void backward(const Tensor& loss);

struct GradCheckOptions {
    double eps = 0.0;           // 0 picks 1e-3 (float32) or 1e-6 (float64)
    std::size_t max_coords = 0;  // 0 checks every coordinate; otherwise a strided subset
};

/// Central-difference check of d f / d x. Returns max over coordinates of
/// |analytic - numeric| / max(1, |numeric|). `f` must be deterministic.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, GradCheckOptions opt = {});

/// Same check against several leaves at once; `f` reads the leaves it closes over.
/// Leaves are perturbed in place and restored.
double grad_check_params(const std::function<Tensor()>& f, std::vector<Tensor> leaves, GradCheckOptions opt = {});

}  // namespace inpaint
