#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "transnet/formats.hpp"
#include "transnet/tensor.hpp"

namespace testing {

using transnet::BasicTensor;
using transnet::Shape;

template <typename T>
BasicTensor<T> random_tensor(const Shape& shape, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> dist(0.0, scale);
    BasicTensor<T> t(shape);
    for (T& v : t.data()) v = static_cast<T>(dist(rng));
    return t;
}

inline double relative_error(double analytic, double numeric) {
    return std::fabs(analytic - numeric) / std::max({std::fabs(analytic), std::fabs(numeric), 1e-6});
}

// Projects a tensor onto fixed random weights so any op becomes a scalar loss.
inline double project(const BasicTensor<double>& t, const BasicTensor<double>& r) {
    double s = 0;
    for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * r[i];
    return s;
}

// Central difference of loss() with respect to x[i]; x is restored afterwards.
inline double central_difference(BasicTensor<double>& x, std::size_t i, const std::function<double()>& loss,
                                 double h = 1e-5) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = loss();
    x[i] = saved - h;
    const double down = loss();
    x[i] = saved;
    return (up - down) / (2 * h);
}

inline transnet::Video solid_video(int width, int height, std::size_t frames, std::uint8_t value) {
    transnet::Video v;
    v.width = width;
    v.height = height;
    v.pixels.assign(frames * v.frame_bytes(), value);
    return v;
}

inline transnet::Video random_video(int width, int height, std::size_t frames, std::mt19937_64& rng) {
    transnet::Video v;
    v.width = width;
    v.height = height;
    v.pixels.resize(frames * v.frame_bytes());
    std::uniform_int_distribution<int> byte(0, 255);
    for (auto& p : v.pixels) p = static_cast<std::uint8_t>(byte(rng));
    return v;
}

// Upper tail of the chi-square distribution with `dof` degrees of freedom,
// via the regularized incomplete gamma function.
inline double chi_square_p_value(double statistic, double dof) {
    const double a = dof / 2, x = statistic / 2;
    if (x <= 0) return 1.0;
    const double log_prefix = a * std::log(x) - x - std::lgamma(a);
    if (x < a + 1) {
        double term = 1.0 / a, sum = term;
        for (int n = 1; n < 10000 && std::fabs(term) > std::fabs(sum) * 1e-15; ++n) {
            term *= x / (a + n);
            sum += term;
        }
        return 1.0 - sum * std::exp(log_prefix);
    }
    // Lentz continued fraction for Q(a, x).
    double b = x + 1 - a, c = 1e300, d = 1 / b, h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -i * (i - a);
        b += 2;
        d = an * d + b;
        if (std::fabs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::fabs(c) < 1e-300) c = 1e-300;
        d = 1 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1) < 1e-15) break;
    }
    return std::exp(log_prefix) * h;
}

// Pearson statistic of observed counts against a uniform expectation.
inline double chi_square_uniform(const std::vector<std::size_t>& counts) {
    double total = 0;
    for (auto c : counts) total += double(c);
    const double expected = total / double(counts.size());
    double stat = 0;
    for (auto c : counts) stat += (double(c) - expected) * (double(c) - expected) / expected;
    return stat;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("transnet_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
    std::filesystem::path path_;
};

}  // namespace testing
