#include "transnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "transnet/errors.hpp"

namespace transnet {
namespace {

template <typename Int>
Int uniform(Rng& rng, Int lo, Int hi) {
    return std::uniform_int_distribution<Int>(lo, hi)(rng);
}

/// Round-half-up of ((T+1-k)*a + k*b) / (T+1), in integers.
std::uint8_t blend(std::uint8_t a, std::uint8_t b, int k, int length) {
    const int denom = length + 1;
    const int num = (denom - k) * a + k * b;
    return static_cast<std::uint8_t>((2 * num + denom) / (2 * denom));
}

Video empty_like(const Shot& shot, int frames) {
    Video v;
    v.width = shot.frames.width;
    v.height = shot.frames.height;
    v.pixels.resize(static_cast<std::size_t>(frames) * v.frame_bytes());
    return v;
}

void copy_frame(const Shot& shot, std::size_t src, Video& dst, std::size_t index) {
    const auto from = shot.frames.frame(src);
    std::copy(from.begin(), from.end(), dst.frame(index).begin());
}

void require_compatible(const Shot& a, const Shot& b, int window) {
    if (a.frames.width != b.frames.width || a.frames.height != b.frames.height) {
        throw DataError("shots have different frame sizes");
    }
    if (window < 2) throw DataError("window must hold at least two frames");
}

}  // namespace

const char* to_string(TransitionKind kind) { return kind == TransitionKind::Cut ? "cut" : "dissolve"; }

ShotPool build_shot_pool(const std::vector<ManifestEntry>& segments, const std::map<std::string, Video>& videos,
                         const ShotPoolOptions& options) {
    ShotPool pool;
    std::size_t kept = 0;
    for (const auto& seg : segments) {
        if (seg.length < options.min_length) continue;
        const bool take = !options.take_every_other || kept % 2 == 0;
        ++kept;
        if (!take) continue;
        auto it = videos.find(seg.video_id);
        if (it == videos.end()) throw DataError("segment refers to unknown video '" + seg.video_id + "'");
        const Video& video = it->second;
        if (seg.offset + seg.length > video.frame_count()) {
            throw DataError("segment [" + std::to_string(seg.offset) + ", +" + std::to_string(seg.length) +
                            ") exceeds the " + std::to_string(video.frame_count()) + " frames of '" + seg.video_id +
                            "'");
        }
        if (pool.shots.empty()) {
            pool.width = video.width;
            pool.height = video.height;
        } else if (video.width != pool.width || video.height != pool.height) {
            throw DataError("video '" + seg.video_id + "' frame size differs from the rest of the pool");
        }
        Shot shot;
        shot.source_id = seg.video_id;
        shot.frames.width = video.width;
        shot.frames.height = video.height;
        const auto first = video.pixels.begin() + static_cast<std::ptrdiff_t>(seg.offset * video.frame_bytes());
        shot.frames.pixels.assign(first, first + static_cast<std::ptrdiff_t>(seg.length * video.frame_bytes()));
        pool.shots.push_back(std::move(shot));
    }
    if (pool.shots.empty()) throw DataError("shot pool is empty after filtering");
    return pool;
}

ShotPool load_shot_pool(const std::filesystem::path& manifest, const ShotPoolOptions& options) {
    const auto segments = load_manifest(manifest);
    std::map<std::string, Video> videos;
    std::map<std::string, std::string> files;
    for (const auto& seg : segments) {
        auto [it, inserted] = files.emplace(seg.video_id, seg.frames_file);
        if (!inserted) {
            if (it->second != seg.frames_file) {
                throw DataError("video '" + seg.video_id + "' is listed with two different frames files");
            }
            continue;
        }
        videos.emplace(seg.video_id, load_raw_frames(seg.frames_file));
    }
    return build_shot_pool(segments, videos, options);
}

LabeledSequence compose_hard_cut(const Shot& a, const Shot& b, int window, int cut, std::size_t offset_a,
                                 std::size_t offset_b) {
    require_compatible(a, b, window);
    if (cut < 0 || cut > window - 2) throw DataError("cut position outside the window");
    const auto from_a = static_cast<std::size_t>(cut) + 1;
    const auto from_b = static_cast<std::size_t>(window - cut - 1);
    if (offset_a + from_a > a.length() || offset_b + from_b > b.length()) {
        throw DataError("shots too short for a cut at frame " + std::to_string(cut));
    }
    LabeledSequence seq;
    seq.frames = empty_like(a, window);
    for (std::size_t i = 0; i < from_a; ++i) copy_frame(a, offset_a + i, seq.frames, i);
    for (std::size_t i = 0; i < from_b; ++i) copy_frame(b, offset_b + i, seq.frames, from_a + i);
    seq.labels.assign(static_cast<std::size_t>(window), false);
    seq.labels[from_a] = true;
    seq.kind = TransitionKind::Cut;
    seq.transition = {cut, cut + 1};
    return seq;
}

LabeledSequence compose_dissolve(const Shot& a, const Shot& b, int window, int start, int length,
                                 std::size_t offset_a, std::size_t offset_b) {
    require_compatible(a, b, window);
    if (length < 1 || start < 1 || start + length > window - 1) {
        throw DataError("dissolve of length " + std::to_string(length) + " at frame " + std::to_string(start) +
                        " does not leave a pure frame on each side of a " + std::to_string(window) + "-frame window");
    }
    const auto from_a = static_cast<std::size_t>(start + length);
    const auto from_b = static_cast<std::size_t>(window - start);
    if (offset_a + from_a > a.length() || offset_b + from_b > b.length()) {
        throw DataError("shots too short for a dissolve of length " + std::to_string(length));
    }
    LabeledSequence seq;
    seq.frames = empty_like(a, window);
    const auto s = static_cast<std::size_t>(start);
    for (std::size_t i = 0; i < static_cast<std::size_t>(window); ++i) {
        if (i < s) {
            copy_frame(a, offset_a + i, seq.frames, i);
        } else if (i >= from_a) {
            copy_frame(b, offset_b + (i - s), seq.frames, i);
        } else {
            const int k = static_cast<int>(i - s) + 1;
            const auto fa = a.frames.frame(offset_a + i);
            const auto fb = b.frames.frame(offset_b + (i - s));
            auto out = seq.frames.frame(i);
            for (std::size_t p = 0; p < out.size(); ++p) out[p] = blend(fa[p], fb[p], k, length);
        }
    }
    seq.labels.assign(static_cast<std::size_t>(window), false);
    seq.labels[s + static_cast<std::size_t>(length / 2)] = true;
    seq.kind = TransitionKind::Dissolve;
    seq.transition = {start, start + length - 1};
    seq.dissolve_length = length;
    return seq;
}

LabeledSequence make_hard_cut(const Shot& a, const Shot& b, int window, Rng& rng) {
    require_compatible(a, b, window);
    const auto n = static_cast<std::int64_t>(window);
    const auto len_a = static_cast<std::int64_t>(a.length());
    const auto len_b = static_cast<std::int64_t>(b.length());
    const std::int64_t lo = std::max<std::int64_t>(0, n - 1 - len_b);
    const std::int64_t hi = std::min<std::int64_t>(n - 2, len_a - 1);
    if (lo > hi) throw DataError("shots too short to fill a " + std::to_string(window) + "-frame cut sequence");
    const auto cut = uniform<std::int64_t>(rng, lo, hi);
    const auto off_a = uniform<std::int64_t>(rng, 0, len_a - (cut + 1));
    const auto off_b = uniform<std::int64_t>(rng, 0, len_b - (n - cut - 1));
    return compose_hard_cut(a, b, window, static_cast<int>(cut), static_cast<std::size_t>(off_a),
                            static_cast<std::size_t>(off_b));
}

LabeledSequence make_dissolve(const Shot& a, const Shot& b, int window, Rng& rng) {
    require_compatible(a, b, window);
    const auto n = static_cast<std::int64_t>(window);
    const auto len_a = static_cast<std::int64_t>(a.length());
    const auto len_b = static_cast<std::int64_t>(b.length());
    auto start_range = [&](std::int64_t length) {
        return std::pair{std::max<std::int64_t>(1, n - len_b), std::min(n - 1 - length, len_a - length)};
    };
    bool any = false;
    for (int t = kMinDissolve; t <= kMaxDissolve && !any; ++t) {
        auto [lo, hi] = start_range(t);
        any = lo <= hi;
    }
    if (!any) throw DataError("shots and window too short for any dissolve length in [5, 30]");
    for (;;) {
        const auto length = uniform<std::int64_t>(rng, kMinDissolve, kMaxDissolve);
        auto [lo, hi] = start_range(length);
        if (lo > hi) continue;
        const auto start = uniform<std::int64_t>(rng, lo, hi);
        const auto off_a = uniform<std::int64_t>(rng, 0, len_a - (start + length));
        const auto off_b = uniform<std::int64_t>(rng, 0, len_b - (n - start));
        return compose_dissolve(a, b, window, static_cast<int>(start), static_cast<int>(length),
                                static_cast<std::size_t>(off_a), static_cast<std::size_t>(off_b));
    }
}

std::vector<LabeledSequence> sample_batch(const ShotPool& pool, const SampleOptions& options, Rng& rng) {
    if (pool.shots.size() < 2) throw DataError("shot pool needs at least two shots to build transitions");
    if (options.batch_size < 1) throw DataError("batch size must be >= 1");
    std::vector<LabeledSequence> batch;
    batch.reserve(static_cast<std::size_t>(options.batch_size));
    const std::size_t last = pool.shots.size() - 1;
    constexpr int kAttempts = 1000;
    while (batch.size() < static_cast<std::size_t>(options.batch_size)) {
        const bool cut = std::bernoulli_distribution(options.cut_probability)(rng);
        bool made = false;
        for (int attempt = 0; attempt < kAttempts && !made; ++attempt) {
            const auto ia = uniform<std::size_t>(rng, 0, last);
            auto ib = uniform<std::size_t>(rng, 0, last - 1);
            if (ib >= ia) ++ib;
            const Shot& a = pool.shots[ia];
            const Shot& b = pool.shots[ib];
            try {
                batch.push_back(cut ? make_hard_cut(a, b, options.window, rng)
                                    : make_dissolve(a, b, options.window, rng));
                made = true;
            } catch (const DataError&) {
            }
        }
        if (!made) {
            throw DataError("could not find two shots long enough for a " + std::to_string(options.window) +
                            "-frame " + (cut ? "cut" : "dissolve") + " sequence");
        }
    }
    return batch;
}

Shot synthetic_shot(std::size_t length, int width, int height, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double base[3], accent[3];
    for (int c = 0; c < 3; ++c) {
        base[c] = 255.0 * unit(rng);
        accent[c] = 255.0 * unit(rng);
    }
    const double fx = 0.15 + 0.6 * unit(rng);
    const double fy = 0.15 + 0.6 * unit(rng);
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    const double speed = 0.3 * (2.0 * unit(rng) - 1.0);
    const double drift = 0.6 * (2.0 * unit(rng) - 1.0);

    Shot shot;
    shot.source_id = "synthetic";
    shot.frames.width = width;
    shot.frames.height = height;
    shot.frames.pixels.resize(length * shot.frames.frame_bytes());
    for (std::size_t k = 0; k < length; ++k) {
        auto frame = shot.frames.frame(k);
        const double t = static_cast<double>(k);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const double s = 0.5 + 0.5 * std::sin(fx * (x + drift * t) + fy * y + phase + speed * t);
                for (int c = 0; c < 3; ++c) {
                    const double v = base[c] + (accent[c] - base[c]) * s;
                    frame[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3 +
                          static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
                }
            }
        }
    }
    return shot;
}

SyntheticSource synthetic_source(std::size_t count, std::size_t min_length, std::size_t max_length, int width,
                                 int height, std::uint64_t seed) {
    if (count == 0 || min_length == 0 || max_length < min_length) throw DataError("invalid synthetic source request");
    Rng rng(seed);
    SyntheticSource src;
    src.video.width = width;
    src.video.height = height;
    std::size_t offset = 0;
    for (std::size_t i = 0; i < count; ++i) {
        const auto length = uniform<std::size_t>(rng, min_length, max_length);
        Shot shot = synthetic_shot(length, width, height, rng);
        src.video.pixels.insert(src.video.pixels.end(), shot.frames.pixels.begin(), shot.frames.pixels.end());
        src.segments.push_back({"synthetic", "", offset, length});
        offset += length;
    }
    return src;
}

SyntheticVideo make_synthetic_video(const ShotPool& pool, std::size_t frames, double cut_probability, Rng& rng) {
    if (pool.shots.size() < 2) throw DataError("shot pool needs at least two shots to build a video");
    if (frames == 0) throw DataError("synthetic video needs at least one frame");
    SyntheticVideo out;
    out.video.width = pool.width;
    out.video.height = pool.height;
    out.video.pixels.reserve(frames * out.video.frame_bytes());
    const std::size_t last = pool.shots.size() - 1;
    auto frame_of = [&](std::size_t shot, std::size_t i) {
        const Shot& s = pool.shots[shot];
        return s.frames.frame(std::min(i, s.length() - 1));
    };
    auto append = [&](std::span<const std::uint8_t> f) {
        out.video.pixels.insert(out.video.pixels.end(), f.begin(), f.end());
    };

    std::size_t t = 0;
    std::size_t current = uniform<std::size_t>(rng, 0, last);
    std::size_t position = 0;
    while (t < frames) {
        const auto run = uniform<std::size_t>(rng, 20, 80);
        for (std::size_t r = 0; r < run && t < frames; ++r, ++t) append(frame_of(current, position++));
        if (t >= frames) break;
        auto next = uniform<std::size_t>(rng, 0, last - 1);
        if (next >= current) ++next;
        const bool cut = std::bernoulli_distribution(cut_probability)(rng);
        const auto length = static_cast<std::size_t>(uniform<int>(rng, kMinDissolve, kMaxDissolve));
        if (cut || t + length + 1 > frames) {
            out.transitions.push_back({static_cast<std::int64_t>(t) - 1, static_cast<std::int64_t>(t)});
            position = 0;
        } else {
            const std::size_t start = t;
            std::vector<std::uint8_t> mixed(out.video.frame_bytes());
            for (std::size_t k = 1; k <= length; ++k, ++t) {
                const auto fa = frame_of(current, position++);
                const auto fb = frame_of(next, k - 1);
                for (std::size_t p = 0; p < mixed.size(); ++p) {
                    mixed[p] = blend(fa[p], fb[p], static_cast<int>(k), static_cast<int>(length));
                }
                append(mixed);
            }
            out.transitions.push_back(
                {static_cast<std::int64_t>(start), static_cast<std::int64_t>(start + length - 1)});
            position = length;
        }
        current = next;
    }
    return out;
}

}  // namespace transnet
