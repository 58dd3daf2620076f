#include "transnet/eval.hpp"

#include <cstdio>

#include "transnet/errors.hpp"

namespace transnet {
namespace {

std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string report_row(const std::string& id, const EvalCounts& c, const Scores& s) {
    return id + "," + std::to_string(c.n_gt) + "," + std::to_string(c.tp) + "," + std::to_string(c.fp) + "," +
           std::to_string(c.fn) + "," + fixed(s.precision) + "," + fixed(s.recall) + "," + fixed(s.f1) + "\n";
}

}  // namespace

EvalCounts match_transitions(const IntervalList& predicted, const IntervalList& ground_truth) {
    validate_interval_list(predicted, "predicted transitions");
    validate_interval_list(ground_truth, "ground-truth transitions");
    EvalCounts counts;
    counts.n_gt = ground_truth.size();
    std::vector<bool> detected(ground_truth.size(), false);
    std::size_t first = 0;
    for (const auto& pred : predicted) {
        // Ground truths ending before this prediction cannot overlap any later one either.
        while (first < ground_truth.size() && ground_truth[first].end < pred.start) ++first;
        bool detects_new = false;
        for (std::size_t g = first; g < ground_truth.size() && ground_truth[g].start <= pred.end; ++g) {
            if (!detected[g]) {
                detected[g] = true;
                ++counts.tp;
                detects_new = true;
            }
        }
        if (!detects_new) ++counts.fp;
    }
    counts.fn = counts.n_gt - counts.tp;
    return counts;
}

Scores scores_from_counts(const EvalCounts& c) {
    if (c.tp == 0 && c.fp == 0 && c.fn == 0) return {1.0, 1.0, 1.0};
    Scores s;
    const auto tp = static_cast<double>(c.tp);
    if (c.tp + c.fp > 0) s.precision = tp / static_cast<double>(c.tp + c.fp);
    if (c.tp + c.fn > 0) s.recall = tp / static_cast<double>(c.tp + c.fn);
    if (s.precision + s.recall > 0) s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

EvalCounts pool_counts(std::span<const EvalCounts> per_video) {
    EvalCounts total;
    for (const auto& c : per_video) total += c;
    return total;
}

double average_f1(std::span<const EvalCounts> per_video) {
    if (per_video.empty()) throw DataError("average F1 of zero videos is undefined");
    double sum = 0;
    for (const auto& c : per_video) sum += scores_from_counts(c).f1;
    return sum / static_cast<double>(per_video.size());
}

double overall_f1(std::span<const EvalCounts> per_video) {
    if (per_video.empty()) throw DataError("overall F1 of zero videos is undefined");
    return scores_from_counts(pool_counts(per_video)).f1;
}

std::vector<double> default_thetas() {
    std::vector<double> thetas;
    for (int i = 1; i <= 18; ++i) thetas.push_back(0.05 * i);
    return thetas;
}

std::vector<PRPoint> pr_sweep(const std::vector<PredictionTrack>& tracks, const std::vector<IntervalList>& ground_truth,
                              std::span<const double> thetas) {
    if (tracks.size() != ground_truth.size()) {
        throw DataError("pr_sweep got " + std::to_string(tracks.size()) + " tracks but " +
                        std::to_string(ground_truth.size()) + " ground-truth lists");
    }
    std::vector<PRPoint> points;
    points.reserve(thetas.size());
    for (double theta : thetas) {
        EvalCounts pooled;
        for (std::size_t v = 0; v < tracks.size(); ++v) {
            pooled += match_transitions(shots_from_predictions(tracks[v], theta).transitions, ground_truth[v]);
        }
        const Scores s = scores_from_counts(pooled);
        points.push_back({theta, s.precision, s.recall, s.f1});
    }
    return points;
}

std::string format_report_csv(const std::vector<VideoReport>& videos) {
    std::string out = "video_id,n_gt,tp,fp,fn,precision,recall,f1\n";
    std::vector<EvalCounts> counts;
    Scores mean;
    for (const auto& v : videos) {
        const Scores s = scores_from_counts(v.counts);
        out += report_row(v.video_id, v.counts, s);
        counts.push_back(v.counts);
        mean.precision += s.precision;
        mean.recall += s.recall;
        mean.f1 += s.f1;
    }
    if (!videos.empty()) {
        const auto n = static_cast<double>(videos.size());
        mean.precision /= n;
        mean.recall /= n;
        mean.f1 /= n;
        const EvalCounts pooled = pool_counts(counts);
        out += report_row("average", pooled, mean);
        out += report_row("overall", pooled, scores_from_counts(pooled));
    }
    return out;
}

std::string format_pr_csv(const std::vector<PRPoint>& points) {
    std::string out = "theta,precision,recall,f1\n";
    for (const auto& p : points) {
        out += fixed(p.theta) + "," + fixed(p.precision) + "," + fixed(p.recall) + "," + fixed(p.f1) + "\n";
    }
    return out;
}

}  // namespace transnet
