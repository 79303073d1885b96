#pragma once

#include "eddynet/kernels.hpp"
#include "eddynet/simulate.hpp"

/// Serial nested-loop implementations. Slow on purpose; they are the
/// oracles the optimized kernels are tested and benchmarked against.
namespace eddynet::reference {

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                         const ConvGeometry& g);

/// Scatter form: every input pixel stamps its kernel into the output.
template <typename T>
Tensor<T> deconv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                           const ConvGeometry& g);

/// Direct quadruple loop over (i, j, m, n) per frequency.
ResponseMaps forward_operate(const CrackProfile& p, const SimConfig& cfg);

}  // namespace eddynet::reference
