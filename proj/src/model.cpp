#include "transnet/model.hpp"

#include <cmath>
#include <random>

#include "transnet/ops.hpp"

namespace transnet {
namespace {

template <typename T>
const BasicTensor<T>& require_param(const BasicWeightStore<T>& weights, const std::string& name) {
    auto it = weights.find(name);
    if (it == weights.end()) throw DataError("missing parameter '" + name + "'");
    return it->second;
}

}  // namespace

void ModelConfig::validate() const {
    auto positive = [](int v, const char* what) {
        if (v < 1) throw DataError(std::string("model config: ") + what + " must be >= 1, got " + std::to_string(v));
    };
    positive(cells_per_block, "cells_per_block");
    positive(blocks, "blocks");
    positive(filters, "filters");
    positive(dense_units, "dense_units");
    positive(window, "window");
    positive(width, "width");
    positive(height, "height");
    if (blocks > 16) throw DataError("model config: blocks must be <= 16");
    int h = height;
    int w = width;
    for (int b = 0; b < blocks; ++b) {
        if (h < 2 || w < 2) {
            throw DataError("model config: " + std::to_string(width) + "x" + std::to_string(height) +
                            " frames cannot be pooled " + std::to_string(blocks) + " times");
        }
        h /= 2;
        w /= 2;
    }
}

int ModelConfig::branch_channels(int block) const { return filters << (block - 1); }

int ModelConfig::block_channels(int block) const { return kBranches * branch_channels(block); }

int ModelConfig::block_input_channels(int block) const {
    return block == 1 ? kInputChannels : block_channels(block - 1);
}

int ModelConfig::pooled_height(int block) const {
    int h = height;
    for (int b = 0; b < block; ++b) h /= 2;
    return h;
}

int ModelConfig::pooled_width(int block) const {
    int w = width;
    for (int b = 0; b < block; ++b) w /= 2;
    return w;
}

std::size_t ModelConfig::feature_width() const {
    return static_cast<std::size_t>(pooled_height(blocks)) * static_cast<std::size_t>(pooled_width(blocks)) *
           static_cast<std::size_t>(block_channels(blocks));
}

std::string conv_weights_name(int block, int cell, int dilation) {
    return "block" + std::to_string(block) + "/cell" + std::to_string(cell) + "/branch_d" + std::to_string(dilation) +
           "/weights";
}

std::string conv_bias_name(int block, int cell, int dilation) {
    return "block" + std::to_string(block) + "/cell" + std::to_string(cell) + "/branch_d" + std::to_string(dilation) +
           "/bias";
}

std::vector<ParameterSpec> parameter_layout(const ModelConfig& config) {
    config.validate();
    std::vector<ParameterSpec> layout;
    for (int block = 1; block <= config.blocks; ++block) {
        const auto out = static_cast<std::size_t>(config.branch_channels(block));
        for (int cell = 1; cell <= config.cells_per_block; ++cell) {
            const auto in = static_cast<std::size_t>(cell == 1 ? config.block_input_channels(block)
                                                               : config.block_channels(block));
            for (int d : ModelConfig::kDilations) {
                layout.push_back({conv_weights_name(block, cell, d), {3, 3, 3, in, out}, 27 * in});
                layout.push_back({conv_bias_name(block, cell, d), {out}, 0});
            }
        }
    }
    const std::size_t features = config.feature_width();
    const auto dense = static_cast<std::size_t>(config.dense_units);
    layout.push_back({kDense1Weights, {features, dense}, features});
    layout.push_back({kDense1Bias, {dense}, 0});
    layout.push_back({kDense2Weights, {dense, 2}, dense});
    layout.push_back({kDense2Bias, {2}, 0});
    return layout;
}

std::size_t param_count(const ModelConfig& config) {
    std::size_t total = 0;
    for (const auto& spec : parameter_layout(config)) total += shape_size(spec.shape);
    return total;
}

int receptive_field_temporal(const ModelConfig& config) {
    return 1 + 2 * ModelConfig::kDilations[ModelConfig::kBranches - 1] * config.cells_per_block * config.blocks;
}

WeightStore init_weights(const ModelConfig& config, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    WeightStore store;
    for (const auto& spec : parameter_layout(config)) {
        Tensor tensor(spec.shape);
        if (spec.fan_in > 0) {
            std::normal_distribution<float> normal(0.0f, std::sqrt(2.0f / static_cast<float>(spec.fan_in)));
            for (float& v : tensor.data()) v = normal(rng);
        }
        store.emplace(spec.name, std::move(tensor));
    }
    return store;
}

template <typename T>
void validate_weights(const ModelConfig& config, const BasicWeightStore<T>& weights) {
    const auto layout = parameter_layout(config);
    for (const auto& spec : layout) {
        const auto& tensor = require_param(weights, spec.name);
        if (tensor.shape() != spec.shape) {
            throw DataError("parameter '" + spec.name + "' has shape " + shape_string(tensor.shape()) + ", expected " +
                            shape_string(spec.shape));
        }
    }
    if (weights.size() != layout.size()) {
        for (const auto& [name, tensor] : weights) {
            bool known = false;
            for (const auto& spec : layout) known = known || spec.name == name;
            if (!known) throw DataError("unknown parameter '" + name + "'");
        }
    }
}

Tensor normalize_frames(std::span<const std::uint8_t> rgb, std::size_t frames, std::size_t height, std::size_t width) {
    Tensor out({frames, height, width, static_cast<std::size_t>(ModelConfig::kInputChannels)});
    if (rgb.size() != out.size()) {
        throw ShapeError("expected " + std::to_string(out.size()) + " RGB bytes for " + shape_string(out.shape()) +
                         ", got " + std::to_string(rgb.size()));
    }
    auto data = out.data();
    for (std::size_t i = 0; i < rgb.size(); ++i) data[i] = static_cast<float>(rgb[i]) / 255.0f;
    return out;
}

template <typename T>
BasicTensor<T> ddcnn_cell_forward(const BasicTensor<T>& input, const BasicWeightStore<T>& weights, int block, int cell,
                                  BasicTensor<T>* pre_activation) {
    std::vector<BasicTensor<T>> branches;
    branches.reserve(ModelConfig::kBranches);
    for (int d : ModelConfig::kDilations) {
        branches.push_back(conv3d_forward(input, require_param(weights, conv_weights_name(block, cell, d)),
                                          require_param(weights, conv_bias_name(block, cell, d)), d));
    }
    BasicTensor<T> concat = concat_channels(branches);
    BasicTensor<T> out = relu(concat);
    if (pre_activation) *pre_activation = std::move(concat);
    return out;
}

template <typename T>
BasicTensor<T> sddcnn_block_forward(const BasicTensor<T>& input, const BasicWeightStore<T>& weights,
                                    const ModelConfig& config, int block) {
    BasicTensor<T> x = input;
    for (int cell = 1; cell <= config.cells_per_block; ++cell) x = ddcnn_cell_forward(x, weights, block, cell);
    return maxpool3d_forward(x);
}

template <typename T>
BasicTensor<T> transnet_forward(const ModelConfig& config, const BasicWeightStore<T>& weights,
                                const BasicTensor<T>& frames, ForwardCache<T>* cache) {
    const Shape expected{static_cast<std::size_t>(config.window), static_cast<std::size_t>(config.height),
                         static_cast<std::size_t>(config.width), static_cast<std::size_t>(ModelConfig::kInputChannels)};
    if (frames.shape() != expected) {
        throw ShapeError("model expects frames " + shape_string(expected) + ", got " + shape_string(frames.shape()));
    }
    if (cache) cache->cells.assign(static_cast<std::size_t>(config.blocks), {});

    BasicTensor<T> x = frames;
    for (int block = 1; block <= config.blocks; ++block) {
        for (int cell = 1; cell <= config.cells_per_block; ++cell) {
            if (cache) {
                typename ForwardCache<T>::Cell entry;
                entry.input = x;
                x = ddcnn_cell_forward(x, weights, block, cell, &entry.pre_activation);
                cache->cells[static_cast<std::size_t>(block - 1)].push_back(std::move(entry));
            } else {
                x = ddcnn_cell_forward(x, weights, block, cell);
            }
        }
        x = maxpool3d_forward(x);
    }

    // Each frame's [H,W,C] block is already contiguous, so flattening is a reshape.
    BasicTensor<T> features = std::move(x).reshaped({frames.dim(0), config.feature_width()});
    BasicTensor<T> hidden_pre = dense_forward(features, require_param(weights, kDense1Weights),
                                              require_param(weights, kDense1Bias));
    BasicTensor<T> hidden = relu(hidden_pre);
    BasicTensor<T> logits =
        dense_forward(hidden, require_param(weights, kDense2Weights), require_param(weights, kDense2Bias));
    BasicTensor<T> probs = softmax_rows(logits);
    if (cache) {
        cache->features = std::move(features);
        cache->hidden_pre = std::move(hidden_pre);
        cache->hidden = std::move(hidden);
        cache->logits = std::move(logits);
        cache->probs = probs;
    }
    return probs;
}

template <typename T>
BasicWeightStore<T> transnet_backward(const ModelConfig& config, const BasicWeightStore<T>& weights,
                                      const ForwardCache<T>& cache, const BasicTensor<T>& grad_logits) {
    if (cache.cells.size() != static_cast<std::size_t>(config.blocks) || cache.logits.empty()) {
        throw DataError("forward cache does not match the model config");
    }
    if (grad_logits.shape() != cache.logits.shape()) {
        throw ShapeError("grad_logits must be " + shape_string(cache.logits.shape()) + ", got " +
                         shape_string(grad_logits.shape()));
    }
    BasicWeightStore<T> grads;

    auto dense2 = dense_backward(cache.hidden, require_param(weights, kDense2Weights), grad_logits);
    grads.emplace(kDense2Weights, std::move(dense2.weights));
    grads.emplace(kDense2Bias, std::move(dense2.bias));
    auto grad_hidden_pre = relu_backward(cache.hidden_pre, dense2.input);
    auto dense1 = dense_backward(cache.features, require_param(weights, kDense1Weights), grad_hidden_pre);
    grads.emplace(kDense1Weights, std::move(dense1.weights));
    grads.emplace(kDense1Bias, std::move(dense1.bias));

    const auto frames = cache.features.dim(0);
    BasicTensor<T> grad = std::move(dense1.input).reshaped(
        {frames, static_cast<std::size_t>(config.pooled_height(config.blocks)),
         static_cast<std::size_t>(config.pooled_width(config.blocks)),
         static_cast<std::size_t>(config.block_channels(config.blocks))});

    for (int block = config.blocks; block >= 1; --block) {
        const auto& cells = cache.cells[static_cast<std::size_t>(block - 1)];
        if (cells.size() != static_cast<std::size_t>(config.cells_per_block)) {
            throw DataError("forward cache has wrong cell count for block " + std::to_string(block));
        }
        grad = maxpool3d_backward(relu(cells.back().pre_activation), grad);
        for (int cell = config.cells_per_block; cell >= 1; --cell) {
            const auto& entry = cells[static_cast<std::size_t>(cell - 1)];
            auto branch_grads = split_channels(relu_backward(entry.pre_activation, grad), ModelConfig::kBranches);
            BasicTensor<T> grad_input(entry.input.shape());
            for (int k = 0; k < ModelConfig::kBranches; ++k) {
                const int d = ModelConfig::kDilations[k];
                auto g = conv3d_backward(entry.input, require_param(weights, conv_weights_name(block, cell, d)), d,
                                         branch_grads[static_cast<std::size_t>(k)]);
                auto gi = grad_input.data();
                const auto gk = g.input.data();
                for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += gk[i];
                grads.emplace(conv_weights_name(block, cell, d), std::move(g.weights));
                grads.emplace(conv_bias_name(block, cell, d), std::move(g.bias));
            }
            grad = std::move(grad_input);
        }
    }
    return grads;
}

template <typename T>
BasicTensor<T> grad_logits_from_probs(const BasicTensor<T>& probs, const BasicTensor<T>& grad_probs) {
    if (probs.rank() != 2 || probs.shape() != grad_probs.shape()) {
        throw ShapeError("softmax backward shapes disagree: " + shape_string(probs.shape()) + " vs " +
                         shape_string(grad_probs.shape()));
    }
    const std::size_t rows = probs.dim(0), cols = probs.dim(1);
    BasicTensor<T> out(probs.shape());
    for (std::size_t n = 0; n < rows; ++n) {
        T dot{};
        for (std::size_t c = 0; c < cols; ++c) dot += probs[n * cols + c] * grad_probs[n * cols + c];
        for (std::size_t c = 0; c < cols; ++c) out[n * cols + c] = probs[n * cols + c] * (grad_probs[n * cols + c] - dot);
    }
    return out;
}

template <typename T>
LossAndGradients<T> loss_and_gradients(const ModelConfig& config, const BasicWeightStore<T>& weights,
                                       const BasicTensor<T>& frames, const std::vector<bool>& labels) {
    ForwardCache<T> cache;
    LossAndGradients<T> result;
    result.probs = transnet_forward(config, weights, frames, &cache);
    auto ce = cross_entropy_from_logits(cache.logits, labels);
    result.loss = ce.loss;
    result.grads = transnet_backward(config, weights, cache, ce.grad_logits);
    return result;
}

std::vector<LayerInfo> layer_table(const ModelConfig& config) {
    config.validate();
    const auto n = static_cast<std::size_t>(config.window);
    std::vector<LayerInfo> table;
    table.push_back({"input", {n, static_cast<std::size_t>(config.height), static_cast<std::size_t>(config.width), 3}, 0});
    for (int block = 1; block <= config.blocks; ++block) {
        const auto h = static_cast<std::size_t>(config.pooled_height(block - 1));
        const auto w = static_cast<std::size_t>(config.pooled_width(block - 1));
        const auto c = static_cast<std::size_t>(config.block_channels(block));
        const auto branch = static_cast<std::size_t>(config.branch_channels(block));
        for (int cell = 1; cell <= config.cells_per_block; ++cell) {
            const auto in = static_cast<std::size_t>(cell == 1 ? config.block_input_channels(block)
                                                               : config.block_channels(block));
            table.push_back({"block" + std::to_string(block) + "/cell" + std::to_string(cell),
                             {n, h, w, c},
                             ModelConfig::kBranches * (27 * in * branch + branch)});
        }
        table.push_back({"block" + std::to_string(block) + "/pool",
                         {n, static_cast<std::size_t>(config.pooled_height(block)),
                          static_cast<std::size_t>(config.pooled_width(block)), c},
                         0});
    }
    const std::size_t features = config.feature_width();
    const auto dense = static_cast<std::size_t>(config.dense_units);
    table.push_back({"head/flatten", {n, features}, 0});
    table.push_back({"head/dense1", {n, dense}, features * dense + dense});
    table.push_back({"head/dense2", {n, 2}, dense * 2 + 2});
    table.push_back({"head/softmax", {n, 2}, 0});
    return table;
}

#define TRANSNET_INSTANTIATE_MODEL(T)                                                                            \
    template void validate_weights(const ModelConfig&, const BasicWeightStore<T>&);                              \
    template BasicTensor<T> ddcnn_cell_forward(const BasicTensor<T>&, const BasicWeightStore<T>&, int, int,       \
                                               BasicTensor<T>*);                                                 \
    template BasicTensor<T> sddcnn_block_forward(const BasicTensor<T>&, const BasicWeightStore<T>&,               \
                                                 const ModelConfig&, int);                                       \
    template BasicTensor<T> transnet_forward(const ModelConfig&, const BasicWeightStore<T>&, const BasicTensor<T>&, \
                                             ForwardCache<T>*);                                                  \
    template BasicWeightStore<T> transnet_backward(const ModelConfig&, const BasicWeightStore<T>&,                \
                                                   const ForwardCache<T>&, const BasicTensor<T>&);               \
    template BasicTensor<T> grad_logits_from_probs(const BasicTensor<T>&, const BasicTensor<T>&);                \
    template LossAndGradients<T> loss_and_gradients(const ModelConfig&, const BasicWeightStore<T>&,               \
                                                    const BasicTensor<T>&, const std::vector<bool>&);

TRANSNET_INSTANTIATE_MODEL(float)
TRANSNET_INSTANTIATE_MODEL(double)
#undef TRANSNET_INSTANTIATE_MODEL

}  // namespace transnet
