#pragma once

#include "csda/tensor.hpp"

namespace csda {

// Differentiable layer and arithmetic primitives. Every op validates its
// shape contract with std::invalid_argument, computes the forward value, and
// (on a recording tape, when an input needs a gradient) records the matching
// backward rule.

// --- elementwise / reductions ---

template <class T> Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> scale(Tape<T>& tape, const Tensor<T>& a, T factor);
template <class T> Tensor<T> sum(Tape<T>& tape, const Tensor<T>& a);   // -> scalar
template <class T> Tensor<T> mean(Tape<T>& tape, const Tensor<T>& a);  // -> scalar

// --- activations ---

template <class T> Tensor<T> relu(Tape<T>& tape, const Tensor<T>& a);
template <class T> Tensor<T> sigmoid(Tape<T>& tape, const Tensor<T>& a);
// Softmax over the channel axis of an [N,C,H,W] tensor; every pixel's channel
// column sums to 1.
template <class T> Tensor<T> softmax_channelwise(Tape<T>& tape, const Tensor<T>& a);

// --- structure ---

// Channel concatenation of [N,Ca,H,W] and [N,Cb,H,W].
template <class T> Tensor<T> concat_channels(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);
// 2x2 max pooling, H and W must be even; ties give the gradient to the first
// position in row-major scan order.
template <class T> Tensor<T> max_pool_2x2(Tape<T>& tape, const Tensor<T>& a);
// Nearest-neighbour upsampling by 2 in both spatial dims.
template <class T> Tensor<T> upsample_nearest_2x(Tape<T>& tape, const Tensor<T>& a);
// Identity forward; backward multiplies the upstream gradient by -lambda.
template <class T> Tensor<T> grad_reverse(Tape<T>& tape, const Tensor<T>& a, T lambda);

// --- dense layers ---

// input [N,Cin,H,W] (+) kernel [Cout,Cin,kh,kw] -> [N,Cout,H',W'],
// H' = (H + 2*padding - kh)/stride + 1 (floor). Cross-correlation plus bias.
template <class T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& kernel,
                 const Tensor<T>& bias, int stride = 1, int padding = 0);

// conv2d with the rectifier fused into the same tape node; numerically
// identical to relu(conv2d(...)) with one less pass over the activations.
template <class T>
Tensor<T> conv2d_relu(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& kernel,
                      const Tensor<T>& bias, int stride = 1, int padding = 0);

// x [N,F] * weights [Out,F]^T + bias [Out] -> [N,Out]
template <class T>
Tensor<T> linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weights,
                 const Tensor<T>& bias);

// [N,C,H,W] -> [N,C], mean over the spatial extent.
template <class T> Tensor<T> global_avg_pool(Tape<T>& tape, const Tensor<T>& a);

#define CSDA_EXTERN_OPS(T)                                                                   \
    extern template Tensor<T> add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);            \
    extern template Tensor<T> sub(Tape<T>&, const Tensor<T>&, const Tensor<T>&);            \
    extern template Tensor<T> mul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);            \
    extern template Tensor<T> scale(Tape<T>&, const Tensor<T>&, T);                         \
    extern template Tensor<T> sum(Tape<T>&, const Tensor<T>&);                              \
    extern template Tensor<T> mean(Tape<T>&, const Tensor<T>&);                             \
    extern template Tensor<T> relu(Tape<T>&, const Tensor<T>&);                             \
    extern template Tensor<T> sigmoid(Tape<T>&, const Tensor<T>&);                          \
    extern template Tensor<T> softmax_channelwise(Tape<T>&, const Tensor<T>&);              \
    extern template Tensor<T> concat_channels(Tape<T>&, const Tensor<T>&, const Tensor<T>&);\
    extern template Tensor<T> max_pool_2x2(Tape<T>&, const Tensor<T>&);                     \
    extern template Tensor<T> upsample_nearest_2x(Tape<T>&, const Tensor<T>&);              \
    extern template Tensor<T> grad_reverse(Tape<T>&, const Tensor<T>&, T);                  \
    extern template Tensor<T> conv2d(Tape<T>&, const Tensor<T>&, const Tensor<T>&,          \
                                     const Tensor<T>&, int, int);                           \
    extern template Tensor<T> conv2d_relu(Tape<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                          const Tensor<T>&, int, int);                      \
    extern template Tensor<T> linear(Tape<T>&, const Tensor<T>&, const Tensor<T>&,          \
                                     const Tensor<T>&);                                     \
    extern template Tensor<T> global_avg_pool(Tape<T>&, const Tensor<T>&);

CSDA_EXTERN_OPS(float)
CSDA_EXTERN_OPS(double)
#undef CSDA_EXTERN_OPS

}  // namespace csda
