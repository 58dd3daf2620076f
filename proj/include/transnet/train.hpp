#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "transnet/eval.hpp"
#include "transnet/model.hpp"
#include "transnet/synth.hpp"

namespace transnet {

struct AdamOptions {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First and second moment estimates per parameter, plus the step count.
struct AdamState {
    WeightStore first_moment;
    WeightStore second_moment;
    std::uint64_t step = 0;
};

AdamState make_adam_state(const WeightStore& weights);

/// One bias-corrected Adam update. Throws NumericError naming the first
/// parameter with a non-finite gradient, leaving weights and state untouched.
void adam_step(WeightStore& weights, const WeightStore& grads, AdamState& state, const AdamOptions& options = {});

struct TrainPlan {
    int epochs = 30;
    int batches_per_epoch = 300;
    int batch_size = 20;
    double learning_rate = 0.001;
    std::uint64_t seed = 0;
    double cut_probability = 0.5;
    double theta = 0.1;          // validation threshold for checkpoint selection
    double clip_norm = 0.0;      // global gradient-norm clip; 0 disables
    std::size_t prefetch = 2;    // batches synthesized ahead on a producer thread; 0 = inline
    int threads = 0;             // 0 keeps the current OpenMP setting
    std::filesystem::path checkpoint_dir;  // empty: no per-epoch checkpoints
};

/// A held-out video with its ground-truth transitions.
struct ValidationVideo {
    std::string id;
    Video frames;
    IntervalList transitions;
};

/// Validation view of labeled sequences, scored against their transition interval.
std::vector<ValidationVideo> validation_from_sequences(const std::vector<LabeledSequence>& sequences);

struct EpochRecord {
    int epoch = 0;
    double mean_loss = 0;
    double val_f1 = 0;
    std::string checkpoint_path;
};

struct TrainResult {
    WeightStore best_weights;
    int best_epoch = 0;  // 1-based; 0 when no epoch finished
    std::vector<EpochRecord> history;
    bool diverged = false;
    std::string message;
};

/// Produces the next training batch; called from a single thread in order.
using BatchSource = std::function<std::vector<LabeledSequence>(Rng&)>;

BatchSource pool_batch_source(const ShotPool& pool, int batch_size, int window, double cut_probability);

/// Draws batch_size distinct sequences (fewer if the set is smaller) from a fixed set.
BatchSource fixed_batch_source(std::vector<LabeledSequence> sequences, int batch_size);

/// Mean loss over the batch; grads receives the mean of per-sequence gradients.
/// Sequences are processed in parallel and reduced in batch order, so the
/// result does not depend on the thread count.
double batch_gradients(const ModelConfig& config, const WeightStore& weights,
                       const std::vector<LabeledSequence>& batch, WeightStore& grads);

/// Scales grads so their global L2 norm is at most max_norm. Returns the norm before clipping.
double clip_gradients(WeightStore& grads, double max_norm);

/// Average per-video F1 of the model on the validation set at threshold theta.
double validation_f1(const ModelConfig& config, const WeightStore& weights, const std::vector<ValidationVideo>& videos,
                     double theta);

/// Runs plan.epochs x plan.batches_per_epoch Adam steps, validating after
/// each epoch and keeping the snapshot with the best validation F1 (earliest
/// on ties). On a non-finite loss, stops and returns the best snapshot so far
/// with diverged set. `initial` overrides the seeded initialization.
TrainResult train(const ModelConfig& config, const BatchSource& batches, const std::vector<ValidationVideo>& validation,
                  const TrainPlan& plan, const WeightStore* initial = nullptr);

TrainResult train(const ModelConfig& config, const ShotPool& pool, const std::vector<ValidationVideo>& validation,
                  const TrainPlan& plan);

/// epoch,mean_loss,val_f1,checkpoint_path
std::string format_history_csv(const std::vector<EpochRecord>& history);

}  // namespace transnet
