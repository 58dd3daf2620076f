#pragma once

// Straightforward serial kernels. They mirror the definitions directly and
// serve as the baseline for tests and benchmarks of the OpenMP kernels.

#include "transnet/ops.hpp"

namespace transnet::reference {

template <typename T>
BasicTensor<T> conv3d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                              const BasicTensor<T>& bias, int dilation);

template <typename T>
ConvGrads<T> conv3d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights, int dilation,
                             const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> maxpool3d_forward(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> maxpool3d_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             const BasicTensor<T>& bias);

template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             const BasicTensor<T>& grad_out);

}  // namespace transnet::reference
