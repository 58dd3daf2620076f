#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "transnet/formats.hpp"
#include "transnet/intervals.hpp"

namespace transnet {

using Rng = std::mt19937_64;

/// A contiguous run of frames from one source video.
struct Shot {
    std::string source_id;
    Video frames;

    std::size_t length() const { return frames.frame_count(); }
};

struct ShotPool {
    int width = 0;
    int height = 0;
    std::vector<Shot> shots;
};

struct ShotPoolOptions {
    bool take_every_other = true;
    std::size_t min_length = 5;
};

/// Drops segments shorter than `min_length`, then (optionally) keeps every
/// other remaining segment starting with the first. `videos` maps video id
/// to decoded frames. Throws DataError if nothing survives.
ShotPool build_shot_pool(const std::vector<ManifestEntry>& segments, const std::map<std::string, Video>& videos,
                         const ShotPoolOptions& options = {});

/// Loads every frames file a manifest refers to and builds the pool.
ShotPool load_shot_pool(const std::filesystem::path& manifest, const ShotPoolOptions& options = {});

enum class TransitionKind { Cut, Dissolve };

const char* to_string(TransitionKind kind);

/// A training window with a single positive frame.
struct LabeledSequence {
    Video frames;
    std::vector<bool> labels;
    TransitionKind kind = TransitionKind::Cut;
    Interval transition;     // [p, p+1] for cuts, [s, s+T-1] for dissolves
    int dissolve_length = 0;  // T; zero for cuts
};

/// Frames 0..cut from shot A (starting at offset_a), the rest from B
/// (starting at offset_b). The label marks frame cut + 1.
LabeledSequence compose_hard_cut(const Shot& a, const Shot& b, int window, int cut, std::size_t offset_a,
                                 std::size_t offset_b);

/// Pure A before `start`, a T-frame linear blend with alpha_k = k / (T+1),
/// pure B after. The label marks frame start + T/2.
LabeledSequence compose_dissolve(const Shot& a, const Shot& b, int window, int start, int length,
                                 std::size_t offset_a, std::size_t offset_b);

/// Random cut position and source offsets. Throws DataError when the shots
/// cannot fill both sides of any cut position.
LabeledSequence make_hard_cut(const Shot& a, const Shot& b, int window, Rng& rng);

/// Random dissolve length in [5, 30], start and offsets. Lengths the shots
/// or window cannot host are redrawn; throws DataError if none fit.
LabeledSequence make_dissolve(const Shot& a, const Shot& b, int window, Rng& rng);

inline constexpr int kMinDissolve = 5;
inline constexpr int kMaxDissolve = 30;

struct SampleOptions {
    int batch_size = 20;
    int window = 100;
    double cut_probability = 0.5;
};

/// Independent examples, each joining two distinct random shots with a cut
/// (probability cut_probability) or a dissolve.
std::vector<LabeledSequence> sample_batch(const ShotPool& pool, const SampleOptions& options, Rng& rng);

/// Procedural stand-in for real footage: each shot is a slowly drifting
/// two-colour pattern with its own palette, frequency and motion.
Shot synthetic_shot(std::size_t length, int width, int height, Rng& rng);

/// `count` synthetic shots with lengths in [min_length, max_length], laid out
/// back to back in one video with a matching manifest (frames_file left empty).
struct SyntheticSource {
    Video video;
    std::vector<ManifestEntry> segments;
};
SyntheticSource synthetic_source(std::size_t count, std::size_t min_length, std::size_t max_length, int width,
                                 int height, std::uint64_t seed);

/// A long video stitched from pool shots with ground-truth transitions.
struct SyntheticVideo {
    Video video;
    IntervalList transitions;
};
SyntheticVideo make_synthetic_video(const ShotPool& pool, std::size_t frames, double cut_probability, Rng& rng);

/// Fixed-capacity FIFO handing items from one producer thread to consumers.
template <typename T>
class BoundedQueue {
 public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(capacity ? capacity : 1) {}

    /// Blocks while full. Returns false if the queue was closed.
    bool push(T item) {
        std::unique_lock lock(mutex_);
        not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
        if (closed_) return false;
        items_.push_back(std::move(item));
        not_empty_.notify_one();
        return true;
    }

    /// Blocks while empty. Returns nullopt once closed and drained.
    std::optional<T> pop() {
        std::unique_lock lock(mutex_);
        not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
        if (items_.empty()) return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return item;
    }

    void close() {
        std::lock_guard lock(mutex_);
        closed_ = true;
        not_full_.notify_all();
        not_empty_.notify_all();
    }

 private:
    std::size_t capacity_;
    std::deque<T> items_;
    bool closed_ = false;
    std::mutex mutex_;
    std::condition_variable not_full_;
    std::condition_variable not_empty_;
};

}  // namespace transnet
