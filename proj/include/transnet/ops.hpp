#pragma once

// OpenMP tensor kernels used by the model. Layout is channels-last
// [T,H,W,C], row-major. Every kernel computes each output element on a
// single thread in a fixed order, so results do not depend on the thread
// count. Serial counterparts live in reference_ops.hpp.

#include <vector>

#include "transnet/tensor.hpp"

namespace transnet {

/// A 3x3x3 convolution with temporal dilation. weights is
/// [3,3,3,Cin,Cout] (time, height, width, in, out); bias is [Cout].
template <typename T>
struct ConvKernel {
    BasicTensor<T> weights;
    BasicTensor<T> bias;
    int temporal_dilation = 1;
};

template <typename T>
struct ConvGrads {
    BasicTensor<T> input;
    BasicTensor<T> weights;
    BasicTensor<T> bias;
};

template <typename T>
struct DenseGrads {
    BasicTensor<T> input;
    BasicTensor<T> weights;
    BasicTensor<T> bias;
};

template <typename T>
struct CrossEntropy {
    T loss{};
    BasicTensor<T> grad_logits;
};

/// Throws ShapeError unless input is [T,H,W,Cin] and weights/bias form a
/// valid 3x3x3 kernel over Cin channels.
template <typename T>
void check_conv_shapes(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                       const BasicTensor<T>& bias, int dilation);

/// Same-padded, stride-1 convolution. Temporal taps sit at {-d, 0, +d},
/// spatial taps at {-1, 0, +1}; out-of-range taps read zero.
template <typename T>
BasicTensor<T> conv3d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                              const BasicTensor<T>& bias, int dilation);

template <typename T>
BasicTensor<T> conv3d_forward(const BasicTensor<T>& input, const ConvKernel<T>& kernel) {
    return conv3d_forward(input, kernel.weights, kernel.bias, kernel.temporal_dilation);
}

template <typename T>
ConvGrads<T> conv3d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights, int dilation,
                             const BasicTensor<T>& grad_out);

/// 1x2x2 max pooling with stride 1x2x2. Odd trailing rows/columns are dropped.
template <typename T>
BasicTensor<T> maxpool3d_forward(const BasicTensor<T>& input);

/// Routes each window's gradient to its maximum; ties go to the first
/// element in row-major scan order.
template <typename T>
BasicTensor<T> maxpool3d_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out);

/// Row-wise affine map: [N,K] x [K,M] + [M] -> [N,M].
template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             const BasicTensor<T>& bias);

template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input);

/// Passes the gradient where input > 0; zero elsewhere, including at 0.
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out);

/// Max-subtracted softmax over the last axis of an [N,C] tensor.
template <typename T>
BasicTensor<T> softmax_rows(const BasicTensor<T>& logits);

/// Mean over rows of -log softmax(logits)[label], with its gradient
/// (softmax - onehot) / N. labels[i] selects column 1 when true.
template <typename T>
CrossEntropy<T> cross_entropy_from_logits(const BasicTensor<T>& logits, const std::vector<bool>& labels);

/// Concatenates tensors of equal leading extents along the last axis.
template <typename T>
BasicTensor<T> concat_channels(const std::vector<BasicTensor<T>>& parts);

/// Inverse of concat_channels for equal-width parts.
template <typename T>
std::vector<BasicTensor<T>> split_channels(const BasicTensor<T>& tensor, std::size_t parts);

}  // namespace transnet
