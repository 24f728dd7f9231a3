#include "inpaint/autograd.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

namespace inpaint {

namespace {

thread_local bool t_grad_enabled = true;
thread_local std::size_t t_last_backward_nodes = 0;
std::atomic<std::uint64_t> g_next_seq{1};

void accumulate(detail::TensorImpl& dst, const Tensor& g) {
    if (g.shape() != dst.shape)
        throw DimensionError("gradient shape " + shape_str(g.shape()) + " does not match tensor shape " + shape_str(dst.shape));
    if (!dst.grad) {
        dst.grad = std::make_shared<detail::Buffer>(*g.impl()->data);
        if (dst.grad->index() != dst.data->index())
            throw ContractError("gradient dtype differs from tensor dtype");
        return;
    }
    std::visit(
        [&](auto& acc) {
            using V = std::decay_t<decltype(acc)>;
            const auto& src = std::get<V>(*g.impl()->data);
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += src[i];
        },
        *dst.grad);
}

}  // namespace

NoGradGuard::NoGradGuard() : prev_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = prev_; }

bool grad_enabled() { return t_grad_enabled; }

namespace autograd {

bool needs_graph(std::initializer_list<const Tensor*> inputs) {
    if (!t_grad_enabled) return false;
    for (const Tensor* t : inputs)
        if (t && t->defined() && t->requires_grad()) return true;
    return false;
}

bool needs_graph(const std::vector<Tensor>& inputs) {
    if (!t_grad_enabled) return false;
    for (const auto& t : inputs)
        if (t.defined() && t.requires_grad()) return true;
    return false;
}

void record(Tensor& out, const std::vector<Tensor>& inputs, detail::BackwardFn fn, const char* name) {
    auto node = std::make_shared<detail::Node>();
    node->seq = g_next_seq.fetch_add(1, std::memory_order_relaxed);
    node->name = name;
    node->inputs.reserve(inputs.size());
    for (const auto& t : inputs) node->inputs.push_back(t.defined() ? t.impl() : nullptr);
    node->backward = std::move(fn);
    out.impl()->node = std::move(node);
}

std::size_t last_backward_node_count() { return t_last_backward_nodes; }

}  // namespace autograd

void backward(const Tensor& loss) {
    if (!loss.defined()) throw ContractError("backward() on an undefined tensor");
    if (loss.numel() != 1)
        throw ContractError("backward() needs a scalar loss, got shape " + shape_str(loss.shape()));
    if (!loss.requires_grad()) throw ContractError("backward() on a tensor that does not require grad");

    // owning handles: releasing one node may drop the last reference to another tensor
    std::vector<std::shared_ptr<detail::TensorImpl>> order;
    std::unordered_set<detail::TensorImpl*> seen;
    std::vector<std::shared_ptr<detail::TensorImpl>> stack{loss.impl()};
    while (!stack.empty()) {
        auto cur = stack.back();
        stack.pop_back();
        if (!cur || !seen.insert(cur.get()).second) continue;
        if (!cur->node) continue;
        for (auto& in : cur->node->inputs) stack.push_back(in);
        order.push_back(std::move(cur));
    }
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a->node->seq > b->node->seq; });

    auto* root = loss.impl().get();
    accumulate(*root, Tensor::full(loss.shape(), 1.0, loss.dtype()));

    for (auto& impl : order) {
        if (!impl->grad) continue;
        auto gimpl = std::make_shared<detail::TensorImpl>();
        gimpl->shape = impl->shape;
        gimpl->data = impl->grad;
        Tensor gout(std::move(gimpl));
        std::vector<Tensor> grads;
        {
            NoGradGuard ng;
            grads = impl->node->backward(gout);
        }
        auto& inputs = impl->node->inputs;
        for (std::size_t i = 0; i < inputs.size() && i < grads.size(); ++i) {
            auto& in = inputs[i];
            if (!in || !grads[i].defined()) continue;
            if (!(in->requires_grad || in->node)) continue;
            accumulate(*in, grads[i]);
        }
        // Intermediate gradients are not kept once propagated.
        if (!impl->requires_grad) impl->grad.reset();
    }
    t_last_backward_nodes = order.size();
    for (auto& impl : order) impl->node.reset();
}

namespace {

std::vector<std::int64_t> pick_coords(std::int64_t n, std::size_t max_coords) {
    std::vector<std::int64_t> out;
    if (max_coords == 0 || static_cast<std::int64_t>(max_coords) >= n) {
        out.resize(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = i;
        return out;
    }
    double stride = static_cast<double>(n) / static_cast<double>(max_coords);
    for (std::size_t k = 0; k < max_coords; ++k)
        out.push_back(std::min<std::int64_t>(n - 1, static_cast<std::int64_t>(std::floor((static_cast<double>(k) + 0.5) * stride))));
    return out;
}

double default_eps(DType dt, double eps) {
    if (eps > 0) return eps;
    return dt == DType::f32 ? 1e-3 : 1e-6;
}

double rel_err(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
}

}  // namespace

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, GradCheckOptions opt) {
    Tensor leaf = x.clone();
    leaf.requires_grad_(true);
    Tensor y = f(leaf);
    if (y.numel() != 1) throw ContractError("grad_check needs a scalar-valued function");
    backward(y);
    std::vector<double> analytic = leaf.grad().defined() ? leaf.grad().to_vector() : std::vector<double>(static_cast<std::size_t>(x.numel()), 0.0);

    const double eps = default_eps(x.dtype(), opt.eps);
    NoGradGuard ng;
    Tensor probe = x.clone();
    double worst = 0.0;
    for (auto i : pick_coords(x.numel(), opt.max_coords)) {
        double orig = dispatch(x.dtype(), [&]<typename T>() { return static_cast<double>(probe.data<T>()[i]); });
        auto set = [&](double v) {
            return dispatch(x.dtype(), [&]<typename T>() {
                probe.mutable_data<T>()[i] = static_cast<T>(v);
                return static_cast<double>(probe.data<T>()[i]);
            });
        };
        // use the steps actually representable in the tensor's dtype
        double hi = set(orig + eps);
        double fp = f(probe).item();
        double lo = set(orig - eps);
        double fm = f(probe).item();
        set(orig);
        double numeric = (fp - fm) / (hi - lo);
        worst = std::max(worst, rel_err(analytic[static_cast<std::size_t>(i)], numeric));
    }
    return worst;
}

double grad_check_params(const std::function<Tensor()>& f, std::vector<Tensor> leaves, GradCheckOptions opt) {
    for (auto& l : leaves) {
        l.requires_grad_(true);
        l.zero_grad();
    }
    Tensor y = f();
    if (y.numel() != 1) throw ContractError("grad_check needs a scalar-valued function");
    backward(y);
    std::vector<std::vector<double>> analytic;
    for (auto& l : leaves)
        analytic.push_back(l.grad().defined() ? l.grad().to_vector() : std::vector<double>(static_cast<std::size_t>(l.numel()), 0.0));

    NoGradGuard ng;
    double worst = 0.0;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        Tensor& leaf = leaves[li];
        const double eps = default_eps(leaf.dtype(), opt.eps);
        for (auto i : pick_coords(leaf.numel(), opt.max_coords)) {
            double orig = dispatch(leaf.dtype(), [&]<typename T>() { return static_cast<double>(leaf.data<T>()[i]); });
            auto set = [&](double v) {
                return dispatch(leaf.dtype(), [&]<typename T>() {
                    leaf.mutable_data<T>()[i] = static_cast<T>(v);
                    return static_cast<double>(leaf.data<T>()[i]);
                });
            };
            double hi = set(orig + eps);
            double fp = f().item();
            double lo = set(orig - eps);
            double fm = f().item();
            set(orig);
            double numeric = (fp - fm) / (hi - lo);
            worst = std::max(worst, rel_err(analytic[li][static_cast<std::size_t>(i)], numeric));
        }
    }
    for (auto& l : leaves) l.zero_grad();
    return worst;
}

}  // namespace inpaint
