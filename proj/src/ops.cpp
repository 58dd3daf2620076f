#include "transnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

namespace transnet {
namespace {

using Index = std::ptrdiff_t;

constexpr Index kTaps = 27;

template <typename T>
void require_rank(const BasicTensor<T>& t, std::size_t rank, const char* what) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(what) + " must have rank " + std::to_string(rank) + ", got " +
                         shape_string(t.shape()));
    }
}

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(what) + ": expected shape " + shape_string(a.shape()) + ", got " +
                         shape_string(b.shape()));
    }
}

struct PoolDims {
    Index frames, height, width, channels, out_height, out_width;
};

template <typename T>
PoolDims pool_dims(const BasicTensor<T>& input) {
    require_rank(input, 4, "maxpool input");
    if (input.dim(1) < 2 || input.dim(2) < 2) {
        throw ShapeError("maxpool needs height and width >= 2, got " + shape_string(input.shape()));
    }
    PoolDims d{};
    d.frames = static_cast<Index>(input.dim(0));
    d.height = static_cast<Index>(input.dim(1));
    d.width = static_cast<Index>(input.dim(2));
    d.channels = static_cast<Index>(input.dim(3));
    d.out_height = d.height / 2;
    d.out_width = d.width / 2;
    return d;
}

}  // namespace

template <typename T>
void check_conv_shapes(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& bias,
                       int dilation) {
    require_rank(input, 4, "conv input");
    if (weights.rank() != 5 || weights.dim(0) != 3 || weights.dim(1) != 3 || weights.dim(2) != 3) {
        throw ShapeError("conv weights must be [3,3,3,Cin,Cout], got " + shape_string(weights.shape()));
    }
    if (input.dim(3) != weights.dim(3)) {
        throw ShapeError("conv input " + shape_string(input.shape()) + " has " + std::to_string(input.dim(3)) +
                         " channels but kernel " + shape_string(weights.shape()) + " expects " +
                         std::to_string(weights.dim(3)));
    }
    if (bias.rank() != 1 || bias.dim(0) != weights.dim(4)) {
        throw ShapeError("conv bias " + shape_string(bias.shape()) + " does not match kernel " +
                         shape_string(weights.shape()));
    }
    if (dilation < 1) throw ShapeError("temporal dilation must be >= 1, got " + std::to_string(dilation));
}

template <typename T>
BasicTensor<T> conv3d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& bias,
                              int dilation) {
    check_conv_shapes(input, weights, bias, dilation);
    const Index frames = static_cast<Index>(input.dim(0));
    const Index height = static_cast<Index>(input.dim(1));
    const Index width = static_cast<Index>(input.dim(2));
    const Index cin = static_cast<Index>(input.dim(3));
    const Index cout = static_cast<Index>(weights.dim(4));

    BasicTensor<T> output({input.dim(0), input.dim(1), input.dim(2), weights.dim(4)});
    const T* x = input.data().data();
    const T* w = weights.data().data();
    const T* b = bias.data().data();
    T* y = output.data().data();

#pragma omp parallel for schedule(static)
    for (Index row = 0; row < frames * height; ++row) {
        const Index t = row / height;
        const Index h = row % height;
        for (Index col = 0; col < width; ++col) {
            T* acc = y + (row * width + col) * cout;
            std::copy(b, b + cout, acc);
            for (Index kt = 0; kt < 3; ++kt) {
                const Index tt = t + (kt - 1) * dilation;
                if (tt < 0 || tt >= frames) continue;
                for (Index kh = 0; kh < 3; ++kh) {
                    const Index hh = h + kh - 1;
                    if (hh < 0 || hh >= height) continue;
                    for (Index kw = 0; kw < 3; ++kw) {
                        const Index ww = col + kw - 1;
                        if (ww < 0 || ww >= width) continue;
                        const T* xin = x + ((tt * height + hh) * width + ww) * cin;
                        const T* tap = w + ((kt * 3 + kh) * 3 + kw) * cin * cout;
                        for (Index ci = 0; ci < cin; ++ci) {
                            const T xv = xin[ci];
                            const T* wrow = tap + ci * cout;
                            for (Index co = 0; co < cout; ++co) acc[co] += xv * wrow[co];
                        }
                    }
                }
            }
        }
    }
    return output;
}

template <typename T>
ConvGrads<T> conv3d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights, int dilation,
                             const BasicTensor<T>& grad_out) {
    BasicTensor<T> zero_bias({weights.rank() == 5 ? weights.dim(4) : 1});
    check_conv_shapes(input, weights, zero_bias, dilation);
    const Shape expected{input.dim(0), input.dim(1), input.dim(2), weights.dim(4)};
    if (grad_out.shape() != expected) {
        throw ShapeError("conv grad_out must be " + shape_string(expected) + ", got " +
                         shape_string(grad_out.shape()));
    }
    const Index frames = static_cast<Index>(input.dim(0));
    const Index height = static_cast<Index>(input.dim(1));
    const Index width = static_cast<Index>(input.dim(2));
    const Index cin = static_cast<Index>(input.dim(3));
    const Index cout = static_cast<Index>(weights.dim(4));
    const Index positions = frames * height * width;

    ConvGrads<T> grads{BasicTensor<T>(input.shape()), BasicTensor<T>(weights.shape()),
                       BasicTensor<T>({weights.dim(4)})};
    const T* x = input.data().data();
    const T* w = weights.data().data();
    const T* g = grad_out.data().data();

    T* gb = grads.bias.data().data();
    for (Index p = 0; p < positions; ++p) {
        const T* gp = g + p * cout;
        for (Index co = 0; co < cout; ++co) gb[co] += gp[co];
    }

    // Weight gradient: each tap is owned by one thread.
    T* gw = grads.weights.data().data();
#pragma omp parallel for schedule(static)
    for (Index tap = 0; tap < kTaps; ++tap) {
        const Index kt = tap / 9;
        const Index kh = (tap / 3) % 3;
        const Index kw = tap % 3;
        T* gtap = gw + tap * cin * cout;
        for (Index t = 0; t < frames; ++t) {
            const Index tt = t + (kt - 1) * dilation;
            if (tt < 0 || tt >= frames) continue;
            for (Index h = 0; h < height; ++h) {
                const Index hh = h + kh - 1;
                if (hh < 0 || hh >= height) continue;
                for (Index col = 0; col < width; ++col) {
                    const Index ww = col + kw - 1;
                    if (ww < 0 || ww >= width) continue;
                    const T* xin = x + ((tt * height + hh) * width + ww) * cin;
                    const T* gp = g + ((t * height + h) * width + col) * cout;
                    for (Index ci = 0; ci < cin; ++ci) {
                        const T xv = xin[ci];
                        if (xv == T{0}) continue;
                        T* grow = gtap + ci * cout;
                        for (Index co = 0; co < cout; ++co) grow[co] += xv * gp[co];
                    }
                }
            }
        }
    }

    // Input gradient gathers from the outputs each input position feeds,
    // using per-tap transposed weights [Cout,Cin] so the inner loop is contiguous.
    std::vector<T> transposed(static_cast<std::size_t>(kTaps * cin * cout));
    for (Index tap = 0; tap < kTaps; ++tap) {
        for (Index ci = 0; ci < cin; ++ci) {
            for (Index co = 0; co < cout; ++co) {
                transposed[(tap * cout + co) * cin + ci] = w[(tap * cin + ci) * cout + co];
            }
        }
    }
    const T* wt = transposed.data();
    T* gi = grads.input.data().data();
#pragma omp parallel for schedule(static)
    for (Index row = 0; row < frames * height; ++row) {
        const Index t = row / height;
        const Index h = row % height;
        for (Index col = 0; col < width; ++col) {
            T* acc = gi + (row * width + col) * cin;
            for (Index kt = 0; kt < 3; ++kt) {
                const Index to = t - (kt - 1) * dilation;
                if (to < 0 || to >= frames) continue;
                for (Index kh = 0; kh < 3; ++kh) {
                    const Index ho = h - (kh - 1);
                    if (ho < 0 || ho >= height) continue;
                    for (Index kw = 0; kw < 3; ++kw) {
                        const Index wo = col - (kw - 1);
                        if (wo < 0 || wo >= width) continue;
                        const T* gp = g + ((to * height + ho) * width + wo) * cout;
                        const T* tap = wt + ((kt * 3 + kh) * 3 + kw) * cout * cin;
                        for (Index co = 0; co < cout; ++co) {
                            const T gv = gp[co];
                            if (gv == T{0}) continue;
                            const T* wrow = tap + co * cin;
                            for (Index ci = 0; ci < cin; ++ci) acc[ci] += gv * wrow[ci];
                        }
                    }
                }
            }
        }
    }
    return grads;
}

template <typename T>
BasicTensor<T> maxpool3d_forward(const BasicTensor<T>& input) {
    const PoolDims d = pool_dims(input);
    BasicTensor<T> output({input.dim(0), static_cast<std::size_t>(d.out_height),
                           static_cast<std::size_t>(d.out_width), input.dim(3)});
    const T* x = input.data().data();
    T* y = output.data().data();
#pragma omp parallel for schedule(static)
    for (Index row = 0; row < d.frames * d.out_height; ++row) {
        const Index t = row / d.out_height;
        const Index i = row % d.out_height;
        for (Index j = 0; j < d.out_width; ++j) {
            const T* p00 = x + ((t * d.height + 2 * i) * d.width + 2 * j) * d.channels;
            const T* p01 = p00 + d.channels;
            const T* p10 = p00 + d.width * d.channels;
            const T* p11 = p10 + d.channels;
            T* out = y + (row * d.out_width + j) * d.channels;
            for (Index c = 0; c < d.channels; ++c) {
                T m = p00[c];
                if (p01[c] > m) m = p01[c];
                if (p10[c] > m) m = p10[c];
                if (p11[c] > m) m = p11[c];
                out[c] = m;
            }
        }
    }
    return output;
}

template <typename T>
BasicTensor<T> maxpool3d_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out) {
    const PoolDims d = pool_dims(input);
    const Shape expected{input.dim(0), static_cast<std::size_t>(d.out_height), static_cast<std::size_t>(d.out_width),
                         input.dim(3)};
    if (grad_out.shape() != expected) {
        throw ShapeError("maxpool grad_out must be " + shape_string(expected) + ", got " +
                         shape_string(grad_out.shape()));
    }
    BasicTensor<T> grad_in(input.shape());
    const T* x = input.data().data();
    const T* g = grad_out.data().data();
    T* gi = grad_in.data().data();
#pragma omp parallel for schedule(static)
    for (Index row = 0; row < d.frames * d.out_height; ++row) {
        const Index t = row / d.out_height;
        const Index i = row % d.out_height;
        for (Index j = 0; j < d.out_width; ++j) {
            const Index base = ((t * d.height + 2 * i) * d.width + 2 * j) * d.channels;
            const Index offsets[4] = {0, d.channels, d.width * d.channels, (d.width + 1) * d.channels};
            const T* gp = g + (row * d.out_width + j) * d.channels;
            for (Index c = 0; c < d.channels; ++c) {
                Index best = 0;
                for (Index k = 1; k < 4; ++k) {
                    if (x[base + offsets[k] + c] > x[base + offsets[best] + c]) best = k;
                }
                gi[base + offsets[best] + c] += gp[c];
            }
        }
    }
    return grad_in;
}

template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& bias) {
    require_rank(input, 2, "dense input");
    require_rank(weights, 2, "dense weights");
    if (input.dim(1) != weights.dim(0)) {
        throw ShapeError("dense input " + shape_string(input.shape()) + " does not match weights " +
                         shape_string(weights.shape()));
    }
    if (bias.rank() != 1 || bias.dim(0) != weights.dim(1)) {
        throw ShapeError("dense bias " + shape_string(bias.shape()) + " does not match weights " +
                         shape_string(weights.shape()));
    }
    const Index rows = static_cast<Index>(input.dim(0));
    const Index inner = static_cast<Index>(input.dim(1));
    const Index cols = static_cast<Index>(weights.dim(1));
    BasicTensor<T> output({input.dim(0), weights.dim(1)});
    const T* x = input.data().data();
    const T* w = weights.data().data();
    const T* b = bias.data().data();
    T* y = output.data().data();
#pragma omp parallel for schedule(static)
    for (Index n = 0; n < rows; ++n) {
        T* acc = y + n * cols;
        std::copy(b, b + cols, acc);
        const T* xr = x + n * inner;
        for (Index k = 0; k < inner; ++k) {
            const T xv = xr[k];
            const T* wr = w + k * cols;
            for (Index m = 0; m < cols; ++m) acc[m] += xv * wr[m];
        }
    }
    return output;
}

template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             const BasicTensor<T>& grad_out) {
    require_rank(input, 2, "dense input");
    require_rank(weights, 2, "dense weights");
    if (input.dim(1) != weights.dim(0) || grad_out.shape() != Shape{input.dim(0), weights.dim(1)}) {
        throw ShapeError("dense backward shapes disagree: input " + shape_string(input.shape()) + ", weights " +
                         shape_string(weights.shape()) + ", grad_out " + shape_string(grad_out.shape()));
    }
    const Index rows = static_cast<Index>(input.dim(0));
    const Index inner = static_cast<Index>(input.dim(1));
    const Index cols = static_cast<Index>(weights.dim(1));
    DenseGrads<T> grads{BasicTensor<T>(input.shape()), BasicTensor<T>(weights.shape()), BasicTensor<T>({weights.dim(1)})};
    const T* x = input.data().data();
    const T* w = weights.data().data();
    const T* g = grad_out.data().data();
    T* gx = grads.input.data().data();
    T* gw = grads.weights.data().data();
    T* gb = grads.bias.data().data();

    for (Index n = 0; n < rows; ++n) {
        for (Index m = 0; m < cols; ++m) gb[m] += g[n * cols + m];
    }
#pragma omp parallel for schedule(static)
    for (Index n = 0; n < rows; ++n) {
        const T* gr = g + n * cols;
        for (Index k = 0; k < inner; ++k) {
            const T* wr = w + k * cols;
            T s{};
            for (Index m = 0; m < cols; ++m) s += gr[m] * wr[m];
            gx[n * inner + k] = s;
        }
    }
#pragma omp parallel for schedule(static)
    for (Index k = 0; k < inner; ++k) {
        T* gwr = gw + k * cols;
        for (Index n = 0; n < rows; ++n) {
            const T xv = x[n * inner + k];
            if (xv == T{0}) continue;
            const T* gr = g + n * cols;
            for (Index m = 0; m < cols; ++m) gwr[m] += xv * gr[m];
        }
    }
    return grads;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input) {
    BasicTensor<T> out(input.shape());
    const auto x = input.data();
    auto y = out.data();
    const Index n = static_cast<Index>(x.size());
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < n; ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
    return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out) {
    require_same_shape(input, grad_out, "relu grad_out");
    BasicTensor<T> out(input.shape());
    const auto x = input.data();
    const auto g = grad_out.data();
    auto y = out.data();
    const Index n = static_cast<Index>(x.size());
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < n; ++i) y[i] = x[i] > T{0} ? g[i] : T{0};
    return out;
}

template <typename T>
BasicTensor<T> softmax_rows(const BasicTensor<T>& logits) {
    require_rank(logits, 2, "softmax logits");
    const std::size_t rows = logits.dim(0);
    const std::size_t cols = logits.dim(1);
    BasicTensor<T> out(logits.shape());
    for (std::size_t n = 0; n < rows; ++n) {
        const T* z = logits.data().data() + n * cols;
        T* p = out.data().data() + n * cols;
        const T peak = *std::max_element(z, z + cols);
        T total{};
        for (std::size_t c = 0; c < cols; ++c) {
            p[c] = std::exp(z[c] - peak);
            total += p[c];
        }
        for (std::size_t c = 0; c < cols; ++c) p[c] /= total;
    }
    return out;
}

template <typename T>
CrossEntropy<T> cross_entropy_from_logits(const BasicTensor<T>& logits, const std::vector<bool>& labels) {
    require_rank(logits, 2, "cross-entropy logits");
    const std::size_t rows = logits.dim(0);
    const std::size_t cols = logits.dim(1);
    if (labels.size() != rows) {
        throw ShapeError("cross-entropy got " + std::to_string(labels.size()) + " labels for logits " +
                         shape_string(logits.shape()));
    }
    if (cols < 2) throw ShapeError("cross-entropy needs at least two classes, got " + shape_string(logits.shape()));
    for (T v : logits.data()) {
        if (!std::isfinite(v)) throw NumericError("cross-entropy received a non-finite logit");
    }
    CrossEntropy<T> result{T{}, BasicTensor<T>(logits.shape())};
    const T scale = T{1} / static_cast<T>(rows);
    for (std::size_t n = 0; n < rows; ++n) {
        const T* z = logits.data().data() + n * cols;
        T* grad = result.grad_logits.data().data() + n * cols;
        const T peak = *std::max_element(z, z + cols);
        T total{};
        for (std::size_t c = 0; c < cols; ++c) total += std::exp(z[c] - peak);
        const T log_norm = peak + std::log(total);
        const std::size_t target = labels[n] ? 1 : 0;
        result.loss += log_norm - z[target];
        for (std::size_t c = 0; c < cols; ++c) {
            const T p = std::exp(z[c] - log_norm);
            grad[c] = (p - (c == target ? T{1} : T{0})) * scale;
        }
    }
    result.loss *= scale;
    return result;
}

template <typename T>
BasicTensor<T> concat_channels(const std::vector<BasicTensor<T>>& parts) {
    if (parts.empty()) throw ShapeError("concat_channels needs at least one tensor");
    Shape lead = parts.front().shape();
    lead.pop_back();
    std::size_t channels = 0;
    for (const auto& p : parts) {
        Shape s = p.shape();
        s.pop_back();
        if (s != lead) {
            throw ShapeError("concat_channels leading extents differ: " + shape_string(parts.front().shape()) +
                             " vs " + shape_string(p.shape()));
        }
        channels += p.shape().back();
    }
    Shape out_shape = lead;
    out_shape.push_back(channels);
    BasicTensor<T> out(out_shape);
    const std::size_t positions = shape_size(lead);
    T* y = out.data().data();
    for (std::size_t pos = 0; pos < positions; ++pos) {
        for (const auto& p : parts) {
            const std::size_t c = p.shape().back();
            const T* src = p.data().data() + pos * c;
            y = std::copy(src, src + c, y);
        }
    }
    return out;
}

template <typename T>
std::vector<BasicTensor<T>> split_channels(const BasicTensor<T>& tensor, std::size_t parts) {
    const std::size_t channels = tensor.shape().back();
    if (parts == 0 || channels % parts != 0) {
        throw ShapeError("cannot split " + shape_string(tensor.shape()) + " into " + std::to_string(parts) +
                         " equal channel groups");
    }
    const std::size_t width = channels / parts;
    Shape part_shape = tensor.shape();
    part_shape.back() = width;
    std::vector<BasicTensor<T>> out(parts, BasicTensor<T>(part_shape));
    const std::size_t positions = tensor.size() / channels;
    const T* x = tensor.data().data();
    for (std::size_t pos = 0; pos < positions; ++pos) {
        for (std::size_t k = 0; k < parts; ++k) {
            const T* src = x + pos * channels + k * width;
            std::copy(src, src + width, out[k].data().data() + pos * width);
        }
    }
    return out;
}

#define TRANSNET_INSTANTIATE_OPS(T)                                                                           \
    template void check_conv_shapes(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, int); \
    template BasicTensor<T> conv3d_forward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, \
                                           int);                                                              \
    template ConvGrads<T> conv3d_backward(const BasicTensor<T>&, const BasicTensor<T>&, int,                    \
                                          const BasicTensor<T>&);                                             \
    template BasicTensor<T> maxpool3d_forward(const BasicTensor<T>&);                                         \
    template BasicTensor<T> maxpool3d_backward(const BasicTensor<T>&, const BasicTensor<T>&);                 \
    template BasicTensor<T> dense_forward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&); \
    template DenseGrads<T> dense_backward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&); \
    template BasicTensor<T> relu(const BasicTensor<T>&);                                                      \
    template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);                      \
    template BasicTensor<T> softmax_rows(const BasicTensor<T>&);                                              \
    template CrossEntropy<T> cross_entropy_from_logits(const BasicTensor<T>&, const std::vector<bool>&);      \
    template BasicTensor<T> concat_channels(const std::vector<BasicTensor<T>>&);                              \
    template std::vector<BasicTensor<T>> split_channels(const BasicTensor<T>&, std::size_t);

TRANSNET_INSTANTIATE_OPS(float)
TRANSNET_INSTANTIATE_OPS(double)
#undef TRANSNET_INSTANTIATE_OPS

}  // namespace transnet
