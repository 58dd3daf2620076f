#pragma once

// Finite-difference check of full-model parameter gradients in double
// precision. Coordinates whose perturbation flips a ReLU mask or a max-pool
// argmax are skipped: the loss is not differentiable across those kinks.

#include <random>
#include <vector>

#include "support.hpp"
#include "transnet/model.hpp"
#include "transnet/ops.hpp"

namespace testing {

struct ModelGradCheck {
    double worst_relative_error = 0;
    std::size_t checked = 0;
    std::size_t skipped = 0;
};

// Which side of every kink the forward pass landed on.
inline std::vector<bool> activation_pattern(const transnet::ModelConfig& config, const transnet::WeightStore64& weights,
                                            const transnet::Tensor64& frames) {
    transnet::ForwardCache<double> cache;
    transnet::transnet_forward(config, weights, frames, &cache);
    std::vector<bool> pattern;
    for (const auto& block : cache.cells) {
        for (const auto& cell : block) {
            for (double v : cell.pre_activation.values()) pattern.push_back(v > 0);
        }
        const auto pooled_in = transnet::relu(block.back().pre_activation);
        const auto ones = transnet::Tensor64(transnet::maxpool3d_forward(pooled_in).shape(), 1.0);
        for (double v : transnet::maxpool3d_backward(pooled_in, ones).values()) pattern.push_back(v != 0);
    }
    for (double v : cache.hidden_pre.values()) pattern.push_back(v > 0);
    return pattern;
}

// Checks `per_tensor` random coordinates of every parameter tensor (all of
// them when the tensor is smaller).
inline ModelGradCheck check_model_gradients(const transnet::ModelConfig& config, transnet::WeightStore64 weights,
                                            const transnet::Tensor64& frames, const std::vector<bool>& labels,
                                            std::size_t per_tensor, std::mt19937_64& rng, double h = 1e-5) {
    ModelGradCheck result;
    const auto analytic = transnet::loss_and_gradients(config, weights, frames, labels);
    const auto base = activation_pattern(config, weights, frames);
    for (auto& [name, tensor] : weights) {
        std::vector<std::size_t> coords(tensor.size());
        for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
        std::shuffle(coords.begin(), coords.end(), rng);
        if (coords.size() > per_tensor) coords.resize(per_tensor);
        for (std::size_t i : coords) {
            const double saved = tensor[i];
            tensor[i] = saved + h;
            const bool same_up = activation_pattern(config, weights, frames) == base;
            const double up = transnet::loss_and_gradients(config, weights, frames, labels).loss;
            tensor[i] = saved - h;
            const bool same_down = activation_pattern(config, weights, frames) == base;
            const double down = transnet::loss_and_gradients(config, weights, frames, labels).loss;
            tensor[i] = saved;
            if (!same_up || !same_down) {
                ++result.skipped;
                continue;
            }
            const double numeric = (up - down) / (2 * h);
            result.worst_relative_error =
                std::max(result.worst_relative_error, relative_error(analytic.grads.at(name)[i], numeric));
            ++result.checked;
        }
    }
    return result;
}

// Tiny configuration used by the full-model gradient checks.
inline transnet::ModelConfig tiny_gradcheck_config() {
    transnet::ModelConfig c;
    c.filters = 2;
    c.blocks = 2;
    c.cells_per_block = 1;
    c.dense_units = 8;
    c.window = 12;
    c.width = 12;
    c.height = 8;
    return c;
}

}  // namespace testing
