#include "transnet/detect.hpp"

#include <algorithm>

#include "transnet/errors.hpp"
#include "transnet/parallel.hpp"

namespace transnet {

std::vector<WindowPlan> plan_windows(std::size_t frames, int window) {
    if (frames == 0) throw DataError("video has no frames");
    if (window < 2) throw DataError("window must be at least 2 frames");
    const auto n = static_cast<std::size_t>(window);
    if (frames <= n) return {{0, 0, frames - 1}};
    const std::size_t stride = n / 2;
    const std::size_t margin = (n - stride) / 2;
    std::vector<WindowPlan> plan;
    for (std::size_t start = 0;; start += stride) {
        WindowPlan w{start, start + margin, start + margin + stride - 1};
        if (start == 0) w.keep_first = 0;
        if (start + n >= frames) {
            w.keep_last = frames - 1;
            plan.push_back(w);
            break;
        }
        plan.push_back(w);
    }
    return plan;
}

Tensor window_tensor(const Video& video, std::size_t start, int window) {
    const std::size_t count = video.frame_count();
    if (count == 0) throw DataError("video has no frames");
    const auto n = static_cast<std::size_t>(window);
    std::vector<std::uint8_t> rgb;
    rgb.reserve(n * video.frame_bytes());
    for (std::size_t i = 0; i < n; ++i) {
        const auto f = video.frame(std::min(start + i, count - 1));
        rgb.insert(rgb.end(), f.begin(), f.end());
    }
    return normalize_frames(rgb, n, static_cast<std::size_t>(video.height), static_cast<std::size_t>(video.width));
}

PredictionTrack predict_video(const ModelConfig& config, const WeightStore& weights, const Video& video,
                              const DetectOptions& options) {
    if (video.frame_count() == 0) throw DataError("video has no frames");
    if (video.width != config.width || video.height != config.height) {
        throw DataError("video frames are " + std::to_string(video.width) + "x" + std::to_string(video.height) +
                        " but the model expects " + std::to_string(config.width) + "x" +
                        std::to_string(config.height));
    }
    ScopedThreadCount threads(options.threads);
    PredictionTrack track(video.frame_count());
    for (const auto& w : plan_windows(video.frame_count(), config.window)) {
        const Tensor probs = transnet_forward(config, weights, window_tensor(video, w.start, config.window));
        for (std::size_t f = w.keep_first; f <= w.keep_last; ++f) track[f] = probs[(f - w.start) * 2 + 1];
    }
    return track;
}

ShotBoundaries shots_from_predictions(std::span<const float> track, double theta) {
    if (!(theta > 0.0 && theta < 1.0)) throw DataError("threshold must lie in (0, 1)");
    ShotBoundaries out;
    const auto n = static_cast<std::int64_t>(track.size());
    std::int64_t i = 0;
    while (i < n) {
        const bool transition = track[static_cast<std::size_t>(i)] > theta;
        std::int64_t j = i;
        while (j + 1 < n && (track[static_cast<std::size_t>(j + 1)] > theta) == transition) ++j;
        (transition ? out.transitions : out.shots).push_back({i, j});
        i = j + 1;
    }
    return out;
}

IntervalList transitions_from_shotlist(const IntervalList& shots, std::size_t frames) {
    validate_interval_list(shots, "shot list");
    const auto n = static_cast<std::int64_t>(frames);
    if (!shots.empty() && shots.back().end >= n) throw DataError("shot list extends past the last frame");
    IntervalList gaps;
    std::int64_t next = 0;
    for (const auto& shot : shots) {
        if (shot.start > next) gaps.push_back({next, shot.start - 1});
        next = shot.end + 1;
    }
    if (next < n) gaps.push_back({next, n - 1});
    return gaps;
}

}  // namespace transnet
