#include "transnet/train.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <numeric>
#include <thread>

#include "transnet/errors.hpp"
#include "transnet/parallel.hpp"
#include "transnet/weights_io.hpp"

namespace transnet {
namespace {

void require_same_keys(const WeightStore& a, const WeightStore& b, const char* what) {
    if (a.size() != b.size()) throw DataError(std::string(what) + ": parameter sets differ in size");
    for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
        if (ia->first != ib->first) {
            throw DataError(std::string(what) + ": parameter '" + ia->first + "' has no counterpart");
        }
        if (ia->second.shape() != ib->second.shape()) {
            throw ShapeError(std::string(what) + ": parameter '" + ia->first + "' shape " +
                             shape_string(ia->second.shape()) + " vs " + shape_string(ib->second.shape()));
        }
    }
}

// Feeds batches either inline or from a producer thread through a bounded queue.
class BatchFeed {
 public:
    BatchFeed(const BatchSource& source, std::uint64_t seed, std::size_t total, std::size_t prefetch)
        : source_(source), rng_(seed), queue_(prefetch) {
        if (prefetch == 0) return;
        producer_ = std::thread([this, total] {
            try {
                for (std::size_t i = 0; i < total; ++i) {
                    if (!queue_.push(source_(rng_))) return;
                }
            } catch (...) {
                error_ = std::current_exception();
            }
            queue_.close();
        });
    }

    ~BatchFeed() {
        queue_.close();
        if (producer_.joinable()) producer_.join();
    }

    std::vector<LabeledSequence> next() {
        if (!producer_.joinable()) return source_(rng_);
        auto batch = queue_.pop();
        if (!batch) {
            if (error_) std::rethrow_exception(error_);
            throw DataError("batch producer stopped early");
        }
        return std::move(*batch);
    }

 private:
    const BatchSource& source_;
    Rng rng_;
    BoundedQueue<std::vector<LabeledSequence>> queue_;
    std::exception_ptr error_;
    std::thread producer_;
};

}  // namespace

AdamState make_adam_state(const WeightStore& weights) {
    return AdamState{zeros_like(weights), zeros_like(weights), 0};
}

void adam_step(WeightStore& weights, const WeightStore& grads, AdamState& state, const AdamOptions& options) {
    require_same_keys(weights, grads, "adam gradients");
    require_same_keys(weights, state.first_moment, "adam first moment");
    require_same_keys(weights, state.second_moment, "adam second moment");
    for (const auto& [name, g] : grads) {
        for (float v : g.data()) {
            if (!std::isfinite(v)) throw NumericError("non-finite gradient in parameter '" + name + "'");
        }
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(options.beta1, t);
    const double correction2 = 1.0 - std::pow(options.beta2, t);
    const auto b1 = static_cast<float>(options.beta1);
    const auto b2 = static_cast<float>(options.beta2);
    for (auto& [name, w] : weights) {
        auto wd = w.data();
        const auto gd = grads.at(name).data();
        auto md = state.first_moment.at(name).data();
        auto vd = state.second_moment.at(name).data();
        for (std::size_t i = 0; i < wd.size(); ++i) {
            md[i] = b1 * md[i] + (1.0f - b1) * gd[i];
            vd[i] = b2 * vd[i] + (1.0f - b2) * gd[i] * gd[i];
            const double m_hat = md[i] / correction1;
            const double v_hat = vd[i] / correction2;
            wd[i] -= static_cast<float>(options.learning_rate * m_hat / (std::sqrt(v_hat) + options.epsilon));
        }
    }
}

std::vector<ValidationVideo> validation_from_sequences(const std::vector<LabeledSequence>& sequences) {
    std::vector<ValidationVideo> videos;
    videos.reserve(sequences.size());
    for (std::size_t i = 0; i < sequences.size(); ++i) {
        videos.push_back({"seq" + std::to_string(i), sequences[i].frames, {sequences[i].transition}});
    }
    return videos;
}

BatchSource pool_batch_source(const ShotPool& pool, int batch_size, int window, double cut_probability) {
    const SampleOptions options{batch_size, window, cut_probability};
    return [&pool, options](Rng& rng) { return sample_batch(pool, options, rng); };
}

BatchSource fixed_batch_source(std::vector<LabeledSequence> sequences, int batch_size) {
    if (sequences.empty()) throw DataError("fixed training set is empty");
    return [set = std::move(sequences), batch_size](Rng& rng) {
        std::vector<std::size_t> order(set.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        const std::size_t take = std::min(order.size(), static_cast<std::size_t>(std::max(batch_size, 1)));
        for (std::size_t i = 0; i < take; ++i) {
            const auto j = std::uniform_int_distribution<std::size_t>(i, order.size() - 1)(rng);
            std::swap(order[i], order[j]);
        }
        std::vector<LabeledSequence> batch;
        batch.reserve(take);
        for (std::size_t i = 0; i < take; ++i) batch.push_back(set[order[i]]);
        return batch;
    };
}

double batch_gradients(const ModelConfig& config, const WeightStore& weights, const std::vector<LabeledSequence>& batch,
                       WeightStore& grads) {
    if (batch.empty()) throw DataError("empty training batch");
    grads = zeros_like(weights);
    const auto h = static_cast<std::size_t>(config.height);
    const auto w = static_cast<std::size_t>(config.width);
    const auto n = static_cast<std::size_t>(config.window);
    const std::size_t chunk = static_cast<std::size_t>(std::max(1, thread_count()));
    std::vector<LossAndGradients<float>> slots(chunk);
    double loss = 0;
    for (std::size_t base = 0; base < batch.size(); base += chunk) {
        const auto count = static_cast<std::ptrdiff_t>(std::min(chunk, batch.size() - base));
        std::exception_ptr error;
#pragma omp parallel for schedule(static, 1) if (count > 1)
        for (std::ptrdiff_t k = 0; k < count; ++k) {
            try {
                const auto& seq = batch[base + static_cast<std::size_t>(k)];
                slots[static_cast<std::size_t>(k)] =
                    loss_and_gradients(config, weights, normalize_frames(seq.frames.pixels, n, h, w), seq.labels);
            } catch (...) {
#pragma omp critical
                error = std::current_exception();
            }
        }
        if (error) std::rethrow_exception(error);
        for (std::ptrdiff_t k = 0; k < count; ++k) {
            auto& slot = slots[static_cast<std::size_t>(k)];
            loss += slot.loss;
            for (auto& [name, g] : grads) {
                auto dst = g.data();
                const auto src = slot.grads.at(name).data();
                for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
            }
        }
    }
    const float scale = 1.0f / static_cast<float>(batch.size());
    for (auto& [name, g] : grads) {
        for (float& v : g.data()) v *= scale;
    }
    return loss / static_cast<double>(batch.size());
}

double clip_gradients(WeightStore& grads, double max_norm) {
    double sq = 0;
    for (const auto& [name, g] : grads) {
        for (float v : g.data()) sq += static_cast<double>(v) * v;
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0 && norm > max_norm) {
        const auto scale = static_cast<float>(max_norm / norm);
        for (auto& [name, g] : grads) {
            for (float& v : g.data()) v *= scale;
        }
    }
    return norm;
}

double validation_f1(const ModelConfig& config, const WeightStore& weights, const std::vector<ValidationVideo>& videos,
                     double theta) {
    std::vector<EvalCounts> counts;
    counts.reserve(videos.size());
    for (const auto& v : videos) {
        const auto track = predict_video(config, weights, v.frames);
        counts.push_back(match_transitions(shots_from_predictions(track, theta).transitions, v.transitions));
    }
    return average_f1(counts);
}

TrainResult train(const ModelConfig& config, const BatchSource& batches, const std::vector<ValidationVideo>& validation,
                  const TrainPlan& plan, const WeightStore* initial) {
    config.validate();
    if (plan.epochs < 1 || plan.batches_per_epoch < 1 || plan.batch_size < 1 || !(plan.learning_rate > 0)) {
        throw DataError("training plan fields must be positive");
    }
    if (validation.empty()) throw DataError("training needs a non-empty validation set");
    ScopedThreadCount threads(plan.threads);

    WeightStore weights = initial ? *initial : init_weights(config, plan.seed);
    validate_weights(config, weights);
    AdamState state = make_adam_state(weights);
    const AdamOptions adam{plan.learning_rate};
    if (!plan.checkpoint_dir.empty()) std::filesystem::create_directories(plan.checkpoint_dir);

    TrainResult result;
    result.best_weights = weights;
    double best_f1 = -1.0;
    const auto total = static_cast<std::size_t>(plan.epochs) * static_cast<std::size_t>(plan.batches_per_epoch);
    BatchFeed feed(batches, plan.seed + 1, total, plan.prefetch);
    WeightStore grads;

    for (int epoch = 1; epoch <= plan.epochs; ++epoch) {
        double loss_sum = 0;
        for (int b = 0; b < plan.batches_per_epoch; ++b) {
            const auto batch = feed.next();
            double loss = 0;
            try {
                loss = batch_gradients(config, weights, batch, grads);
                if (!std::isfinite(loss)) throw NumericError("training loss became non-finite");
                if (plan.clip_norm > 0) clip_gradients(grads, plan.clip_norm);
                adam_step(weights, grads, state, adam);
            } catch (const NumericError& e) {
                result.diverged = true;
                result.message = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(b + 1) + ": " + e.what();
                if (result.best_epoch == 0) result.best_weights = weights;
                return result;
            }
            loss_sum += loss;
        }
        EpochRecord record;
        record.epoch = epoch;
        record.mean_loss = loss_sum / plan.batches_per_epoch;
        record.val_f1 = validation_f1(config, weights, validation, plan.theta);
        if (!plan.checkpoint_dir.empty()) {
            char name[32];
            std::snprintf(name, sizeof(name), "epoch_%03d.tnsw", epoch);
            const auto path = plan.checkpoint_dir / name;
            save_weights(weights, config, path);
            record.checkpoint_path = path.string();
        }
        if (record.val_f1 > best_f1) {
            best_f1 = record.val_f1;
            result.best_weights = weights;
            result.best_epoch = epoch;
        }
        result.history.push_back(std::move(record));
    }
    return result;
}

TrainResult train(const ModelConfig& config, const ShotPool& pool, const std::vector<ValidationVideo>& validation,
                  const TrainPlan& plan) {
    return train(config, pool_batch_source(pool, plan.batch_size, config.window, plan.cut_probability), validation,
                 plan);
}

std::string format_history_csv(const std::vector<EpochRecord>& history) {
    std::string out = "epoch,mean_loss,val_f1,checkpoint_path\n";
    for (const auto& r : history) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,", r.epoch, r.mean_loss, r.val_f1);
        out += buf;
        out += r.checkpoint_path;
        out += '\n';
    }
    return out;
}

}  // namespace transnet
