#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "msfum/tensor.hpp"

namespace msfum {

enum class Act { silu, sigmoid, relu, softplus };

// Elementwise / reduction -------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& x, T s);

template <typename T>
Tensor<T> activation(const Tensor<T>& x, Act kind);

template <typename T>
Tensor<T> silu(const Tensor<T>& x) {
    return activation(x, Act::silu);
}
template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    return activation(x, Act::relu);
}
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    return activation(x, Act::sigmoid);
}
template <typename T>
Tensor<T> softplus(const Tensor<T>& x) {
    return activation(x, Act::softplus);
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x);

// Linear maps --------------------------------------------------------------

// x[..., Din] * w[Dout, Din]^T + b, batched over leading axes.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w);

// Cross-correlation, x[N,Cin,H,W] * w[Cout,Cin,kh,kw] + b[Cout].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int64_t stride,
                 int64_t padding);

// Per-channel 1-D convolution along L, x[N,L,C] * w[C,k] + b[C].
// causal=true pads k-1 zeros at the sequence start; output length is L.
template <typename T>
Tensor<T> conv1d_depthwise(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                           bool causal);

// Normalisation / pooling ---------------------------------------------------

// Per-token normalisation over the channel axis of x[N,L,C].
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps);

// Spatial mean per channel: x[N,C,H,W] -> [N,C].
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);

// Shape plumbing -------------------------------------------------------------

// Channel-axis concatenation of [N,Ci,H,W] parts in argument order.
template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs);

// out[n,c,:,:] = x[n,c,:,:] * gate[n,c]
template <typename T>
Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& gate);

// Half-pixel-center bilinear x2 upsampling of [N,C,H,W].
template <typename T>
Tensor<T> upsample_bilinear_x2(const Tensor<T>& x);

// [N,C,H,W] -> [N,H*W,C] row-major flattening and its inverse.
template <typename T>
Tensor<T> nchw_to_nlc(const Tensor<T>& x);

template <typename T>
Tensor<T> nlc_to_nchw(const Tensor<T>& x, int64_t h, int64_t w);

// Scalar helpers shared with kernel-level code.
template <typename T>
T sigmoid_scalar(T x) {
    if (x >= T(0)) {
        return T(1) / (T(1) + std::exp(-x));
    }
    const T e = std::exp(x);
    return e / (T(1) + e);
}

template <typename T>
T softplus_scalar(T x) {
    // max(x,0) + log1p(exp(-|x|)) never overflows
    const T ax = x < T(0) ? -x : x;
    const T base = x > T(0) ? x : T(0);
    return base + std::log1p(std::exp(-ax));
}

}  // namespace msfum
