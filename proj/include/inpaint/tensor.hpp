#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace inpaint {

enum class DType : std::uint8_t { f32 = 0x01, f64 = 0x02 };

const char* dtype_name(DType dt);

/// Raised when operand extents are incompatible. The message names the shapes involved.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a documented precondition is violated (bad axis, non-scalar loss, T=0, ...).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

using Shape = std::vector<std::int64_t>;

std::string shape_str(const Shape& s);
std::int64_t shape_numel(const Shape& s);

class Tensor;

namespace detail {

using Buffer = std::variant<std::vector<float>, std::vector<double>>;

struct Node;

struct TensorImpl {
    Shape shape;
    std::shared_ptr<Buffer> data;
    bool requires_grad = false;
    std::shared_ptr<Buffer> grad;
    std::shared_ptr<Node> node;
};

// Backward closure: receives d(loss)/d(output), returns one gradient per input
// (an undefined Tensor where the input receives nothing).
using BackwardFn = std::function<std::vector<Tensor>(const Tensor& grad_out)>;

struct Node {
    std::uint64_t seq = 0;
    std::string name;
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    BackwardFn backward;
};

}  // namespace detail

/// Dense row-major tensor (rank 0..5) with float32 or float64 storage.
///
/// Copies are cheap handles that share storage. Operations never modify their
/// inputs; the only in-place writers are mutable_data() (used for parameter
/// updates and freshly built buffers) and the gradient accumulators.
class Tensor {
public:
    static constexpr int kMaxRank = 5;

    Tensor() = default;
    Tensor(Shape shape, DType dtype);

    static Tensor zeros(Shape shape, DType dtype = DType::f32);
    static Tensor ones(Shape shape, DType dtype = DType::f32);
    static Tensor full(Shape shape, double value, DType dtype = DType::f32);
    static Tensor scalar(double value, DType dtype = DType::f32);
    static Tensor from(Shape shape, std::vector<float> values);
    static Tensor from(Shape shape, std::vector<double> values);
    static Tensor from_doubles(Shape shape, const std::vector<double>& values, DType dtype);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    int rank() const { return static_cast<int>(shape().size()); }
    /// Extent of an axis; negative axes count from the back.
    std::int64_t size(int axis) const;
    std::int64_t numel() const;
    DType dtype() const;

    template <typename T>
    std::span<const T> data() const;
    template <typename T>
    std::span<T> mutable_data();

    double item() const;
    double at(std::initializer_list<std::int64_t> index) const;
    void set(std::initializer_list<std::int64_t> index, double value);
    std::vector<double> to_vector() const;

    bool requires_grad() const;
    Tensor& requires_grad_(bool on = true);
    bool is_leaf() const;
    /// Accumulated gradient, undefined when none has been written.
    Tensor grad() const;
    void zero_grad();

    /// Same storage, no autograd history.
    Tensor detach() const;
    Tensor clone() const;
    Tensor to(DType dtype) const;

    bool same_storage(const Tensor& other) const;
    bool bitwise_equal(const Tensor& other) const;

    const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

private:
    void check_defined() const;
    std::shared_ptr<detail::TensorImpl> impl_;
};

std::int64_t linear_index(const Shape& shape, std::span<const std::int64_t> index);

/// Runs `fn.template operator()<T>()` with T = float or double according to `dt`.
template <typename Fn>
decltype(auto) dispatch(DType dt, Fn&& fn) {
    if (dt == DType::f32) return fn.template operator()<float>();
    return fn.template operator()<double>();
}

template <typename T>
constexpr DType dtype_of() {
    return std::is_same_v<T, float> ? DType::f32 : DType::f64;
}

}  // namespace inpaint
