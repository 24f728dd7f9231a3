#pragma once

#include <cstdint>
#include <vector>

#include "inpaint/tensor.hpp"

namespace inpaint {

// Elementwise arithmetic with numpy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return add_scalar(a, -s); }
inline Tensor operator*(const Tensor& a, double s) { return mul_scalar(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return mul_scalar(a, s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// Unary maps.
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
/// tanh approximation of GELU.
Tensor gelu(const Tensor& x);
/// Gradient is passed only where lo < x < hi.
Tensor clamp(const Tensor& x, double lo, double hi);

// Reductions.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor sum(const Tensor& x, int axis, bool keepdim = false);
Tensor mean(const Tensor& x, int axis, bool keepdim = false);

// Layout.
Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<int>& axes);
Tensor transpose(const Tensor& x, int a, int b);
Tensor concat(const std::vector<Tensor>& xs, int axis);
Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t length);
/// Broadcasts to `shape` following the usual trailing-axis rule.
Tensor broadcast_to(const Tensor& x, const Shape& shape);

/// [m,k]x[k,n] or batched [B,m,k]x[B,k,n].
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor softmax(const Tensor& x, int axis);
Tensor log_softmax(const Tensor& x, int axis);
/// Normalizes over the last axis; gamma/beta have the last axis' extent (either may be undefined).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

struct BatchNormState {
    Tensor running_mean;  // [C], updated in place in training mode
    Tensor running_var;   // [C]
    double momentum = 0.1;
    double eps = 1e-5;
};

/// Per-channel normalization of an [N,C,H,W] tensor. Training mode uses batch
/// statistics (biased variance) and updates the running estimates with the
/// unbiased variance; inference mode uses the running estimates.
Tensor batch_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state, bool training);

struct ConvSpec {
    int stride = 1;
    int padding = 0;
    int dilation = 1;
};

std::int64_t conv_out_extent(std::int64_t in, std::int64_t kernel, const ConvSpec& spec);
std::int64_t tconv_out_extent(std::int64_t in, std::int64_t kernel, const ConvSpec& spec, int output_padding = 0);

/// Zero-padded cross-correlation: x [N,C,H,W], w [F,C,kh,kw], bias [F] or undefined.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, const ConvSpec& spec);

/// Adjoint of conv2d with respect to its input: x [N,F,H,W], w [F,C,kh,kw] (same layout
/// as the forward weight), output [N,C,H',W'] with H' = (H-1)*stride - 2*padding + dilation*(kh-1) + 1 + output_padding.
Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& bias, const ConvSpec& spec, int output_padding = 0);

/// Nearest-neighbor resampling of the last two axes (src = floor(dst * in / out)).
Tensor resize_nearest(const Tensor& x, std::int64_t out_h, std::int64_t out_w);
/// Bilinear resampling of the last two axes, half-pixel centers, edge clamped.
Tensor resize_bilinear(const Tensor& x, std::int64_t out_h, std::int64_t out_w);

/// Real 2-D FFT over the last two axes of [N,C,H,W]: output [N,2C,H,W/2+1] with
/// channel 2c holding the real part and 2c+1 the imaginary part. W must be even.
Tensor rfft2_stacked(const Tensor& x);
/// Inverse of rfft2_stacked: [N,2C,H,Wf] -> [N,C,H,out_w] with out_w = 2*(Wf-1).
/// Imaginary parts on the k_w = 0 and Nyquist columns are ignored.
Tensor irfft2_stacked(const Tensor& y);

}  // namespace inpaint
