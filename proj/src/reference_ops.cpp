#include "transnet/reference_ops.hpp"

namespace transnet::reference {
namespace {

using Index = std::ptrdiff_t;

}  // namespace

template <typename T>
BasicTensor<T> conv3d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& bias,
                              int dilation) {
    check_conv_shapes(input, weights, bias, dilation);
    const Index frames = input.dim(0), height = input.dim(1), width = input.dim(2), cin = input.dim(3);
    const Index cout = weights.dim(4);
    BasicTensor<T> out({input.dim(0), input.dim(1), input.dim(2), weights.dim(4)});
    for (Index t = 0; t < frames; ++t)
        for (Index h = 0; h < height; ++h)
            for (Index w = 0; w < width; ++w)
                for (Index co = 0; co < cout; ++co) {
                    T sum = bias[co];
                    for (Index kt = 0; kt < 3; ++kt)
                        for (Index kh = 0; kh < 3; ++kh)
                            for (Index kw = 0; kw < 3; ++kw) {
                                const Index tt = t + (kt - 1) * dilation, hh = h + kh - 1, ww = w + kw - 1;
                                if (tt < 0 || tt >= frames || hh < 0 || hh >= height || ww < 0 || ww >= width) continue;
                                for (Index ci = 0; ci < cin; ++ci) {
                                    sum += input[((tt * height + hh) * width + ww) * cin + ci] *
                                           weights[(((kt * 3 + kh) * 3 + kw) * cin + ci) * cout + co];
                                }
                            }
                    out[((t * height + h) * width + w) * cout + co] = sum;
                }
    return out;
}

template <typename T>
ConvGrads<T> conv3d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights, int dilation,
                             const BasicTensor<T>& grad_out) {
    BasicTensor<T> bias({weights.dim(4)});
    check_conv_shapes(input, weights, bias, dilation);
    if (grad_out.shape() != Shape{input.dim(0), input.dim(1), input.dim(2), weights.dim(4)}) {
        throw ShapeError("conv grad_out shape " + shape_string(grad_out.shape()) + " does not match output");
    }
    const Index frames = input.dim(0), height = input.dim(1), width = input.dim(2), cin = input.dim(3);
    const Index cout = weights.dim(4);
    ConvGrads<T> g{BasicTensor<T>(input.shape()), BasicTensor<T>(weights.shape()), BasicTensor<T>({weights.dim(4)})};
    for (Index t = 0; t < frames; ++t)
        for (Index h = 0; h < height; ++h)
            for (Index w = 0; w < width; ++w)
                for (Index co = 0; co < cout; ++co) {
                    const T go = grad_out[((t * height + h) * width + w) * cout + co];
                    g.bias[co] += go;
                    for (Index kt = 0; kt < 3; ++kt)
                        for (Index kh = 0; kh < 3; ++kh)
                            for (Index kw = 0; kw < 3; ++kw) {
                                const Index tt = t + (kt - 1) * dilation, hh = h + kh - 1, ww = w + kw - 1;
                                if (tt < 0 || tt >= frames || hh < 0 || hh >= height || ww < 0 || ww >= width) continue;
                                for (Index ci = 0; ci < cin; ++ci) {
                                    const Index xi = ((tt * height + hh) * width + ww) * cin + ci;
                                    const Index wi = (((kt * 3 + kh) * 3 + kw) * cin + ci) * cout + co;
                                    g.input[xi] += weights[wi] * go;
                                    g.weights[wi] += input[xi] * go;
                                }
                            }
                }
    return g;
}

template <typename T>
BasicTensor<T> maxpool3d_forward(const BasicTensor<T>& input) {
    if (input.rank() != 4 || input.dim(1) < 2 || input.dim(2) < 2) {
        throw ShapeError("maxpool input must be [T,H>=2,W>=2,C], got " + shape_string(input.shape()));
    }
    const Index frames = input.dim(0), height = input.dim(1), width = input.dim(2), ch = input.dim(3);
    const Index oh = height / 2, ow = width / 2;
    BasicTensor<T> out({input.dim(0), static_cast<std::size_t>(oh), static_cast<std::size_t>(ow), input.dim(3)});
    for (Index t = 0; t < frames; ++t)
        for (Index i = 0; i < oh; ++i)
            for (Index j = 0; j < ow; ++j)
                for (Index c = 0; c < ch; ++c) {
                    T best = input[((t * height + 2 * i) * width + 2 * j) * ch + c];
                    for (Index di = 0; di < 2; ++di)
                        for (Index dj = 0; dj < 2; ++dj) {
                            const T v = input[((t * height + 2 * i + di) * width + 2 * j + dj) * ch + c];
                            if (v > best) best = v;
                        }
                    out[((t * oh + i) * ow + j) * ch + c] = best;
                }
    return out;
}

template <typename T>
BasicTensor<T> maxpool3d_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out) {
    const BasicTensor<T> pooled = reference::maxpool3d_forward(input);
    if (grad_out.shape() != pooled.shape()) {
        throw ShapeError("maxpool grad_out shape " + shape_string(grad_out.shape()) + " does not match " +
                         shape_string(pooled.shape()));
    }
    const Index frames = input.dim(0), height = input.dim(1), width = input.dim(2), ch = input.dim(3);
    const Index oh = height / 2, ow = width / 2;
    BasicTensor<T> g(input.shape());
    for (Index t = 0; t < frames; ++t)
        for (Index i = 0; i < oh; ++i)
            for (Index j = 0; j < ow; ++j)
                for (Index c = 0; c < ch; ++c) {
                    const Index oi = ((t * oh + i) * ow + j) * ch + c;
                    bool routed = false;
                    for (Index di = 0; di < 2 && !routed; ++di)
                        for (Index dj = 0; dj < 2 && !routed; ++dj) {
                            const Index xi = ((t * height + 2 * i + di) * width + 2 * j + dj) * ch + c;
                            if (input[xi] == pooled[oi]) {
                                g[xi] += grad_out[oi];
                                routed = true;
                            }
                        }
                }
    return g;
}

template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& bias) {
    if (input.rank() != 2 || weights.rank() != 2 || input.dim(1) != weights.dim(0) || bias.rank() != 1 ||
        bias.dim(0) != weights.dim(1)) {
        throw ShapeError("dense shapes disagree: input " + shape_string(input.shape()) + ", weights " +
                         shape_string(weights.shape()));
    }
    const Index rows = input.dim(0), inner = input.dim(1), cols = weights.dim(1);
    BasicTensor<T> out({input.dim(0), weights.dim(1)});
    for (Index n = 0; n < rows; ++n)
        for (Index m = 0; m < cols; ++m) {
            T sum = bias[m];
            for (Index k = 0; k < inner; ++k) sum += input[n * inner + k] * weights[k * cols + m];
            out[n * cols + m] = sum;
        }
    return out;
}

template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             const BasicTensor<T>& grad_out) {
    const Index rows = input.dim(0), inner = input.dim(1), cols = weights.dim(1);
    if (grad_out.shape() != Shape{input.dim(0), weights.dim(1)} || input.dim(1) != weights.dim(0)) {
        throw ShapeError("dense backward shapes disagree");
    }
    DenseGrads<T> g{BasicTensor<T>(input.shape()), BasicTensor<T>(weights.shape()), BasicTensor<T>({weights.dim(1)})};
    for (Index n = 0; n < rows; ++n)
        for (Index m = 0; m < cols; ++m) {
            const T go = grad_out[n * cols + m];
            g.bias[m] += go;
            for (Index k = 0; k < inner; ++k) {
                g.input[n * inner + k] += weights[k * cols + m] * go;
                g.weights[k * cols + m] += input[n * inner + k] * go;
            }
        }
    return g;
}

#define TRANSNET_INSTANTIATE_REFERENCE(T)                                                                     \
    template BasicTensor<T> conv3d_forward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, \
                                           int);                                                              \
    template ConvGrads<T> conv3d_backward(const BasicTensor<T>&, const BasicTensor<T>&, int,                    \
                                          const BasicTensor<T>&);                                             \
    template BasicTensor<T> maxpool3d_forward(const BasicTensor<T>&);                                         \
    template BasicTensor<T> maxpool3d_backward(const BasicTensor<T>&, const BasicTensor<T>&);                 \
    template BasicTensor<T> dense_forward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&); \
    template DenseGrads<T> dense_backward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);

TRANSNET_INSTANTIATE_REFERENCE(float)
TRANSNET_INSTANTIATE_REFERENCE(double)
#undef TRANSNET_INSTANTIATE_REFERENCE

}  // namespace transnet::reference
