#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "transnet/tensor.hpp"

namespace transnet {

/// Architecture meta-parameters. Defaults are the best-performing
/// configuration: 16 filters, 3 blocks of 2 cells, 256 dense units, over
/// 100-frame windows of 48x27 RGB frames.
struct ModelConfig {
    int cells_per_block = 2;  // S
    int blocks = 3;           // L
    int filters = 16;         // F, per branch in the first block
    int dense_units = 256;    // D
    int window = 100;         // N, frames per forward pass
    int width = 48;
    int height = 27;

    static constexpr int kInputChannels = 3;
    static constexpr int kBranches = 4;
    static constexpr int kDilations[kBranches] = {1, 2, 4, 8};

    /// Throws DataError when any field is non-positive or the frame is too
    /// small to survive `blocks` rounds of 2x2 pooling.
    void validate() const;

    /// Output channels of one branch in block `block` (1-based): 2^(block-1) * filters.
    int branch_channels(int block) const;
    /// Channels leaving every cell of block `block`: four concatenated branches.
    int block_channels(int block) const;
    int block_input_channels(int block) const;
    /// Spatial extents after `block` poolings (floor halving).
    int pooled_height(int block) const;
    int pooled_width(int block) const;
    /// Length of one frame's flattened [H,W,C] feature row entering the dense head.
    std::size_t feature_width() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename T>
using BasicWeightStore = std::map<std::string, BasicTensor<T>>;
using WeightStore = BasicWeightStore<float>;
using WeightStore64 = BasicWeightStore<double>;

std::string conv_weights_name(int block, int cell, int dilation);
std::string conv_bias_name(int block, int cell, int dilation);
inline const char* const kDense1Weights = "head/dense1/weights";
inline const char* const kDense1Bias = "head/dense1/bias";
inline const char* const kDense2Weights = "head/dense2/weights";
inline const char* const kDense2Bias = "head/dense2/bias";

struct ParameterSpec {
    std::string name;
    Shape shape;
    std::size_t fan_in = 0;  // zero for biases
};

/// Every parameter tensor implied by `config`, in construction order.
std::vector<ParameterSpec> parameter_layout(const ModelConfig& config);

/// Total trainable parameters, biases included.
std::size_t param_count(const ModelConfig& config);

/// Element total of an actual store.
template <typename T>
std::size_t param_count(const BasicWeightStore<T>& weights) {
    std::size_t total = 0;
    for (const auto& [name, tensor] : weights) total += tensor.size();
    return total;
}

/// Frames of context that can influence one output frame: each cell's
/// dilation-8 branch reaches 8 frames either side, so 1 + 16 * S * L.
int receptive_field_temporal(const ModelConfig& config);

/// He-normal weights (std = sqrt(2 / fan_in)) and zero biases.
/// Deterministic for a given seed.
WeightStore init_weights(const ModelConfig& config, std::uint64_t seed);

/// Throws DataError naming the first missing, unexpected or misshapen parameter.
template <typename T>
void validate_weights(const ModelConfig& config, const BasicWeightStore<T>& weights);

template <typename U, typename T>
BasicWeightStore<U> cast_weights(const BasicWeightStore<T>& weights) {
    BasicWeightStore<U> out;
    for (const auto& [name, tensor] : weights) out.emplace(name, tensor.template cast<U>());
    return out;
}

/// Zero-filled store with the same keys and shapes.
template <typename T>
BasicWeightStore<T> zeros_like(const BasicWeightStore<T>& weights) {
    BasicWeightStore<T> out;
    for (const auto& [name, tensor] : weights) out.emplace(name, BasicTensor<T>(tensor.shape()));
    return out;
}

/// Converts raw 8-bit RGB frames into a [frames,height,width,3] tensor in [0,1].
Tensor normalize_frames(std::span<const std::uint8_t> rgb, std::size_t frames, std::size_t height,
                        std::size_t width);

/// Activations kept by a forward pass for the backward pass.
template <typename T>
struct ForwardCache {
    struct Cell {
        BasicTensor<T> input;
        BasicTensor<T> pre_activation;  // concatenated branch outputs before ReLU
    };
    std::vector<std::vector<Cell>> cells;  // [block][cell]
    BasicTensor<T> features;               // [N, feature_width]
    BasicTensor<T> hidden_pre;
    BasicTensor<T> hidden;
    BasicTensor<T> logits;
    BasicTensor<T> probs;
};

/// One DDCNN cell: four dilated convolutions (1, 2, 4, 8) concatenated in
/// that order along channels, then ReLU. `block` and `cell` are 1-based.
/// When `pre_activation` is non-null it receives the concatenation before ReLU.
template <typename T>
BasicTensor<T> ddcnn_cell_forward(const BasicTensor<T>& input, const BasicWeightStore<T>& weights, int block,
                                  int cell, BasicTensor<T>* pre_activation = nullptr);

/// S cells applied in sequence followed by 1x2x2 max pooling.
template <typename T>
BasicTensor<T> sddcnn_block_forward(const BasicTensor<T>& input, const BasicWeightStore<T>& weights,
                                    const ModelConfig& config, int block);

/// Full network over one window. frames is [N,height,width,3] in [0,1];
/// returns [N,2] rows of (P(no boundary), P(boundary)).
template <typename T>
BasicTensor<T> transnet_forward(const ModelConfig& config, const BasicWeightStore<T>& weights,
                                const BasicTensor<T>& frames, ForwardCache<T>* cache = nullptr);

/// Gradients of every parameter given dLoss/dlogits.
template <typename T>
BasicWeightStore<T> transnet_backward(const ModelConfig& config, const BasicWeightStore<T>& weights,
                                      const ForwardCache<T>& cache, const BasicTensor<T>& grad_logits);

/// Softmax Jacobian applied to an upstream gradient on the probabilities.
template <typename T>
BasicTensor<T> grad_logits_from_probs(const BasicTensor<T>& probs, const BasicTensor<T>& grad_probs);

template <typename T>
struct LossAndGradients {
    T loss{};
    BasicWeightStore<T> grads;
    BasicTensor<T> probs;
};

/// Mean per-frame cross-entropy against `labels` and its parameter gradients.
template <typename T>
LossAndGradients<T> loss_and_gradients(const ModelConfig& config, const BasicWeightStore<T>& weights,
                                       const BasicTensor<T>& frames, const std::vector<bool>& labels);

struct LayerInfo {
    std::string name;
    Shape output_shape;
    std::size_t params = 0;
};

/// Per-layer output shapes and parameter counts for one window.
std::vector<LayerInfo> layer_table(const ModelConfig& config);

}  // namespace transnet
