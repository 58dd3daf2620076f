#pragma once

#include <span>
#include <string>
#include <vector>

#include "transnet/detect.hpp"
#include "transnet/intervals.hpp"

namespace transnet {

/// Transition-level counts for one video (or pooled over several).
struct EvalCounts {
    std::size_t n_gt = 0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    EvalCounts& operator+=(const EvalCounts& o) {
        n_gt += o.n_gt;
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        return *this;
    }
    friend bool operator==(const EvalCounts&, const EvalCounts&) = default;
};

struct Scores {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

struct PRPoint {
    double theta = 0;
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

/// Overlap matching in temporal order. A ground-truth transition is a true
/// positive once any prediction overlaps it; predictions that overlap no
/// ground truth, or only ones already detected, are false positives;
/// ground truths nothing overlaps are false negatives. Both lists must be
/// sorted and disjoint.
EvalCounts match_transitions(const IntervalList& predicted, const IntervalList& ground_truth);

/// P = tp/(tp+fp), R = tp/(tp+fn), F1 = 2PR/(P+R). An empty prediction set
/// against an empty ground truth scores 1 everywhere; otherwise an undefined
/// ratio is 0.
Scores scores_from_counts(const EvalCounts& counts);

EvalCounts pool_counts(std::span<const EvalCounts> per_video);

/// Unweighted mean of per-video F1.
double average_f1(std::span<const EvalCounts> per_video);

/// F1 of the pooled counts.
double overall_f1(std::span<const EvalCounts> per_video);

/// 0.05, 0.10, ..., 0.90.
std::vector<double> default_thetas();

/// Pooled precision/recall/F1 at each threshold.
std::vector<PRPoint> pr_sweep(const std::vector<PredictionTrack>& tracks, const std::vector<IntervalList>& ground_truth,
                              std::span<const double> thetas);

struct VideoReport {
    std::string video_id;
    EvalCounts counts;
};

/// video_id,n_gt,tp,fp,fn,precision,recall,f1 rows followed by an "average"
/// row (mean of per-video scores) and an "overall" row (pooled counts).
std::string format_report_csv(const std::vector<VideoReport>& videos);

/// theta,precision,recall,f1 rows.
std::string format_pr_csv(const std::vector<PRPoint>& points);

}  // namespace transnet
