// Serial reference kernels vs the OpenMP kernels, plus end-to-end
// throughput of the default model.
//
//   transnet_bench [--repeats N] [--threads N] [--skip-model]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <random>
#include <string>

#include "transnet/detect.hpp"
#include "transnet/model.hpp"
#include "transnet/ops.hpp"
#include "transnet/parallel.hpp"
#include "transnet/reference_ops.hpp"

using namespace transnet;

namespace {

Tensor random_tensor(const Shape& shape, std::mt19937_64& rng) {
    std::normal_distribution<float> dist(0.0f, 1.0f);
    Tensor t(shape);
    for (float& v : t.data()) v = dist(rng);
    return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(double(a[i]) - double(b[i])));
    return m;
}

// Best wall time over `repeats` runs, in milliseconds.
double time_ms(int repeats, const std::function<void()>& fn) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

void report(const char* name, double ref_ms, double omp_ms, double diff) {
    std::printf("%-22s ref %9.2f ms   omp %9.2f ms   speedup %5.2fx   max|diff| %.3g\n", name, ref_ms, omp_ms,
                ref_ms / omp_ms, diff);
}

}  // namespace

int main(int argc, char** argv) {
    int repeats = 3;
    int threads = 0;
    bool skip_model = false;
    for (int i = 1; i < argc; ++i) {
        if (!std::strcmp(argv[i], "--repeats") && i + 1 < argc) {
            repeats = std::atoi(argv[++i]);
        } else if (!std::strcmp(argv[i], "--threads") && i + 1 < argc) {
            threads = std::atoi(argv[++i]);
        } else if (!std::strcmp(argv[i], "--skip-model")) {
            skip_model = true;
        } else {
            std::fprintf(stderr, "usage: %s [--repeats N] [--threads N] [--skip-model]\n", argv[0]);
            return 1;
        }
    }
    ScopedThreadCount scope(threads > 0 ? threads : default_thread_count());
    std::printf("threads: %d\n", thread_count());

    std::mt19937_64 rng(7);
    // First-block cell input at reduced width: [T,H,W,Cin] -> Cout.
    const Tensor x = random_tensor({50, 27, 48, 16}, rng);
    const Tensor w = random_tensor({3, 3, 3, 16, 16}, rng);
    const Tensor b = random_tensor({16}, rng);
    Tensor ref_out, omp_out;
    const double ref_fwd = time_ms(repeats, [&] { ref_out = reference::conv3d_forward(x, w, b, 4); });
    const double omp_fwd = time_ms(repeats, [&] { omp_out = conv3d_forward(x, w, b, 4); });
    report("conv3d forward", ref_fwd, omp_fwd, max_abs_diff(ref_out, omp_out));

    const Tensor g = random_tensor(omp_out.shape(), rng);
    ConvGrads<float> ref_g, omp_g;
    const double ref_bwd = time_ms(repeats, [&] { ref_g = reference::conv3d_backward(x, w, 4, g); });
    const double omp_bwd = time_ms(repeats, [&] { omp_g = conv3d_backward(x, w, 4, g); });
    report("conv3d backward", ref_bwd, omp_bwd,
           std::max({max_abs_diff(ref_g.input, omp_g.input), max_abs_diff(ref_g.weights, omp_g.weights),
                     max_abs_diff(ref_g.bias, omp_g.bias)}));

    const double ref_pool = time_ms(repeats, [&] { ref_out = reference::maxpool3d_forward(x); });
    const double omp_pool = time_ms(repeats, [&] { omp_out = maxpool3d_forward(x); });
    report("maxpool forward", ref_pool, omp_pool, max_abs_diff(ref_out, omp_out));

    const Tensor feats = random_tensor({100, 4608}, rng);
    const Tensor dw = random_tensor({4608, 256}, rng);
    const Tensor db = random_tensor({256}, rng);
    const double ref_dense = time_ms(repeats, [&] { ref_out = reference::dense_forward(feats, dw, db); });
    const double omp_dense = time_ms(repeats, [&] { omp_out = dense_forward(feats, dw, db); });
    report("dense forward", ref_dense, omp_dense, max_abs_diff(ref_out, omp_out));

    if (!skip_model) {
        const ModelConfig config;
        const WeightStore weights = init_weights(config, 1);
        Video video;
        video.width = config.width;
        video.height = config.height;
        const std::size_t frames = 2 * static_cast<std::size_t>(config.window);
        video.pixels.resize(frames * video.frame_bytes());
        std::uniform_int_distribution<int> byte(0, 255);
        for (auto& p : video.pixels) p = static_cast<std::uint8_t>(byte(rng));
        const double ms = time_ms(1, [&] { predict_video(config, weights, video); });
        std::printf("%-22s %zu frames in %.1f ms, %.1f frames/sec (%zu parameters)\n", "default model", frames, ms,
                    1000.0 * static_cast<double>(frames) / ms, param_count(config));
    }
    return 0;
}
