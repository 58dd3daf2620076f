#pragma once

#include <span>
#include <vector>

#include "transnet/formats.hpp"
#include "transnet/intervals.hpp"
#include "transnet/model.hpp"

namespace transnet {

/// Per-frame boundary probability for a whole video.
using PredictionTrack = std::vector<float>;

/// One forward pass: frames [start, start + window) (edge-replicated past
/// the end of the video), of which [keep_first, keep_last] are retained.
struct WindowPlan {
    std::size_t start = 0;
    std::size_t keep_first = 0;
    std::size_t keep_last = 0;
    friend bool operator==(const WindowPlan&, const WindowPlan&) = default;
};

/// Windows start every window/2 frames. Each keeps the central half
/// [start + margin, start + margin + stride - 1], margin = (window - stride) / 2;
/// the first window also keeps its leading margin and the last window keeps
/// everything through the final frame. For window = 100 this is stride 50,
/// frames 25..74.
std::vector<WindowPlan> plan_windows(std::size_t frames, int window);

/// [window, height, width, 3] tensor in [0,1] for frames start.., clamping
/// indices past the end to the last frame.
Tensor window_tensor(const Video& video, std::size_t start, int window);

struct DetectOptions {
    int threads = 0;  // 0 keeps the current OpenMP setting
};

/// Runs the model over every planned window and stitches retained predictions.
PredictionTrack predict_video(const ModelConfig& config, const WeightStore& weights, const Video& video,
                              const DetectOptions& options = {});

struct ShotBoundaries {
    IntervalList shots;
    IntervalList transitions;
};

/// Frames with p > theta are transition frames; their maximal runs form the
/// transition list and the complementary runs form the shot list.
ShotBoundaries shots_from_predictions(std::span<const float> track, double theta);

/// Gaps of a shot list within [0, frames-1].
IntervalList transitions_from_shotlist(const IntervalList& shots, std::size_t frames);

}  // namespace transnet
