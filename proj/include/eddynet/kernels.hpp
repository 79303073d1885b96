#pragma once

#include "eddynet/tensor.hpp"

namespace eddynet {

/// Kernel/stride/pad per axis.
struct ConvGeometry {
  int kh = 1, kw = 1;
  int sh = 1, sw = 1;
  int ph = 0, pw = 0;

  int conv_out(int in, bool vertical) const {
    return vertical ? (in + 2 * ph - kh) / sh + 1 : (in + 2 * pw - kw) / sw + 1;
  }
  int deconv_out(int in, bool vertical) const {
    return vertical ? (in - 1) * sh - 2 * ph + kh : (in - 1) * sw - 2 * pw + kw;
  }
};

enum class Activation { none, mish, relu, leaky_relu, sigmoid };

inline constexpr double kLeakySlope = 0.2;
inline constexpr double kBatchNormMomentum = 0.1;
inline constexpr double kBatchNormEps = 1e-5;

enum class Mode { train, eval };

/// Optimized kernels: im2col + GEMM for the convolutions, OpenMP over
/// independent planes/channels elsewhere. Reference loops live in reference.hpp.
namespace kernels {

/// x [B,Cin,H,W], w [Cout,Cin,kh,kw], bias [Cout] or empty.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                         const ConvGeometry& g);

/// Gradients of conv2d_forward. dbias is skipped when null.
template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                     const ConvGeometry& g, Tensor<T>* dx, Tensor<T>& dw, Tensor<T>* dbias);

/// Transposed convolution. x [B,Cin,H,W], w [Cin,Cout,kh,kw].
template <typename T>
Tensor<T> deconv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                           const ConvGeometry& g);

template <typename T>
void deconv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                       const ConvGeometry& g, Tensor<T>* dx, Tensor<T>& dw, Tensor<T>* dbias);

/// Saved per-channel batch statistics for the backward pass.
template <typename T>
struct BatchNormCache {
  std::vector<double> inv_std;
  Tensor<T> xhat;
  Mode mode = Mode::train;
};

/// Normalizes by biased batch statistics and folds them into the running
/// estimates: r <- (1 - momentum) r + momentum * batch_stat.
template <typename T>
Tensor<T> batchnorm_forward_train(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                                  Tensor<T>& running_mean, Tensor<T>& running_var,
                                  BatchNormCache<T>* cache, double momentum = kBatchNormMomentum,
                                  double eps = kBatchNormEps);

/// Normalizes by the running estimates; nothing is written.
template <typename T>
Tensor<T> batchnorm_forward_eval(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                                 const Tensor<T>& running_mean, const Tensor<T>& running_var,
                                 BatchNormCache<T>* cache, double eps = kBatchNormEps);

template <typename T>
void batchnorm_backward(const Tensor<T>& dy, const Tensor<T>& gain, const BatchNormCache<T>& cache,
                        Tensor<T>& dx, Tensor<T>& dgain, Tensor<T>& dbias);

template <typename T>
T activate(Activation a, T x);

template <typename T>
Tensor<T> activation_forward(const Tensor<T>& x, Activation a);

/// dx = dy * f'(x).
template <typename T>
Tensor<T> activation_backward(const Tensor<T>& x, const Tensor<T>& dy, Activation a);

/// [B,K,H,W] -> [B,1,H,W]: per pixel softmax(x)^T x over the K channels.
template <typename T>
Tensor<T> attention_forward(const Tensor<T>& x);

template <typename T>
Tensor<T> attention_backward(const Tensor<T>& x, const Tensor<T>& dy);

/// Mean absolute error; grad = sign(pred - truth) / N with sign(0) = 0.
template <typename T>
double mae_loss(const Tensor<T>& pred, const Tensor<T>& truth, Tensor<T>* grad);

}  // namespace kernels
}  // namespace eddynet
