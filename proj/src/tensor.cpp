#include "inpaint/tensor.hpp"

#include <cstring>
#include <sstream>

namespace inpaint {

const char* dtype_name(DType dt) { return dt == DType::f32 ? "float32" : "float64"; }

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << ']';
    return os.str();
}

std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (auto e : s) n *= e;
    return n;
}

std::int64_t linear_index(const Shape& shape, std::span<const std::int64_t> index) {
    if (index.size() != shape.size())
        throw DimensionError("index rank " + std::to_string(index.size()) + " does not match shape " + shape_str(shape));
    std::int64_t li = 0;
    for (std::size_t a = 0; a < shape.size(); ++a) {
        if (index[a] < 0 || index[a] >= shape[a])
            throw DimensionError("index out of range for shape " + shape_str(shape));
        li = li * shape[a] + index[a];
    }
    return li;
}

namespace {

void validate_shape(const Shape& s) {
    if (s.size() > static_cast<std::size_t>(Tensor::kMaxRank))
        throw DimensionError("rank > 5 not supported: " + shape_str(s));
    for (auto e : s)
        if (e < 1) throw DimensionError("extents must be >= 1: " + shape_str(s));
}

std::shared_ptr<detail::Buffer> make_buffer(DType dt, std::size_t n) {
    if (dt == DType::f32) return std::make_shared<detail::Buffer>(std::vector<float>(n, 0.0f));
    return std::make_shared<detail::Buffer>(std::vector<double>(n, 0.0));
}

}  // namespace

Tensor::Tensor(Shape shape, DType dtype) {
    validate_shape(shape);
    impl_ = std::make_shared<detail::TensorImpl>();
    auto n = static_cast<std::size_t>(shape_numel(shape));
    impl_->shape = std::move(shape);
    impl_->data = make_buffer(dtype, n);
}

Tensor Tensor::zeros(Shape shape, DType dtype) { return Tensor(std::move(shape), dtype); }

Tensor Tensor::ones(Shape shape, DType dtype) { return full(std::move(shape), 1.0, dtype); }

Tensor Tensor::full(Shape shape, double value, DType dtype) {
    Tensor t(std::move(shape), dtype);
    dispatch(dtype, [&]<typename T>() {
        for (auto& v : t.mutable_data<T>()) v = static_cast<T>(value);
    });
    return t;
}

Tensor Tensor::scalar(double value, DType dtype) { return full({}, value, dtype); }

Tensor Tensor::from(Shape shape, std::vector<float> values) {
    validate_shape(shape);
    if (static_cast<std::int64_t>(values.size()) != shape_numel(shape))
        throw DimensionError("value count " + std::to_string(values.size()) + " does not match shape " + shape_str(shape));
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::make_shared<detail::Buffer>(std::move(values));
    return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
    validate_shape(shape);
    if (static_cast<std::int64_t>(values.size()) != shape_numel(shape))
        throw DimensionError("value count " + std::to_string(values.size()) + " does not match shape " + shape_str(shape));
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::make_shared<detail::Buffer>(std::move(values));
    return Tensor(std::move(impl));
}

Tensor Tensor::from_doubles(Shape shape, const std::vector<double>& values, DType dtype) {
    if (dtype == DType::f64) return from(std::move(shape), values);
    return from(std::move(shape), std::vector<float>(values.begin(), values.end()));
}

void Tensor::check_defined() const {
    if (!impl_) throw ContractError("operation on an undefined tensor");
}

const Shape& Tensor::shape() const {
    check_defined();
    return impl_->shape;
}

std::int64_t Tensor::size(int axis) const {
    int r = rank();
    int a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r) throw ContractError("axis " + std::to_string(axis) + " invalid for shape " + shape_str(shape()));
    return impl_->shape[static_cast<std::size_t>(a)];
}

std::int64_t Tensor::numel() const { return shape_numel(shape()); }

DType Tensor::dtype() const {
    check_defined();
    return std::holds_alternative<std::vector<float>>(*impl_->data) ? DType::f32 : DType::f64;
}

template <typename T>
std::span<const T> Tensor::data() const {
    check_defined();
    auto* v = std::get_if<std::vector<T>>(impl_->data.get());
    if (!v) throw ContractError(std::string("tensor dtype is ") + dtype_name(dtype()) + ", requested other");
    return {v->data(), v->size()};
}

template <typename T>
std::span<T> Tensor::mutable_data() {
    check_defined();
    auto* v = std::get_if<std::vector<T>>(impl_->data.get());
    if (!v) throw ContractError(std::string("tensor dtype is ") + dtype_name(dtype()) + ", requested other");
    return {v->data(), v->size()};
}

template std::span<const float> Tensor::data<float>() const;
template std::span<const double> Tensor::data<double>() const;
template std::span<float> Tensor::mutable_data<float>();
template std::span<double> Tensor::mutable_data<double>();

double Tensor::item() const {
    if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
    return dispatch(dtype(), [&]<typename T>() { return static_cast<double>(data<T>()[0]); });
}

double Tensor::at(std::initializer_list<std::int64_t> index) const {
    auto li = linear_index(shape(), std::span<const std::int64_t>(index.begin(), index.size()));
    return dispatch(dtype(), [&]<typename T>() { return static_cast<double>(data<T>()[li]); });
}

void Tensor::set(std::initializer_list<std::int64_t> index, double value) {
    auto li = linear_index(shape(), std::span<const std::int64_t>(index.begin(), index.size()));
    dispatch(dtype(), [&]<typename T>() { mutable_data<T>()[li] = static_cast<T>(value); });
}

std::vector<double> Tensor::to_vector() const {
    return dispatch(dtype(), [&]<typename T>() {
        auto d = data<T>();
        return std::vector<double>(d.begin(), d.end());
    });
}

bool Tensor::requires_grad() const {
    check_defined();
    return impl_->requires_grad || impl_->node != nullptr;
}

Tensor& Tensor::requires_grad_(bool on) {
    check_defined();
    impl_->requires_grad = on;
    return *this;
}

bool Tensor::is_leaf() const {
    check_defined();
    return impl_->node == nullptr;
}

Tensor Tensor::grad() const {
    check_defined();
    if (!impl_->grad) return {};
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = impl_->shape;
    impl->data = impl_->grad;
    return Tensor(std::move(impl));
}

void Tensor::zero_grad() {
    check_defined();
    impl_->grad.reset();
}

Tensor Tensor::detach() const {
    check_defined();
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = impl_->shape;
    impl->data = impl_->data;
    return Tensor(std::move(impl));
}

Tensor Tensor::clone() const {
    check_defined();
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = impl_->shape;
    impl->data = std::make_shared<detail::Buffer>(*impl_->data);
    return Tensor(std::move(impl));
}

Tensor Tensor::to(DType dt) const {
    if (dt == dtype()) return clone();
    auto v = to_vector();
    return from_doubles(shape(), v, dt);
}

bool Tensor::same_storage(const Tensor& other) const {
    return impl_ && other.impl_ && impl_->data == other.impl_->data;
}

bool Tensor::bitwise_equal(const Tensor& other) const {
    if (!defined() || !other.defined()) return defined() == other.defined();
    if (shape() != other.shape() || dtype() != other.dtype()) return false;
    return dispatch(dtype(), [&]<typename T>() {
        auto a = data<T>();
        auto b = other.data<T>();
        return std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
    });
}

}  // namespace inpaint
