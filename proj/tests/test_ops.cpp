#include <doctest.h>

#include <cmath>
#include <limits>

#include "support.hpp"
#include "transnet/errors.hpp"
#include "transnet/ops.hpp"
#include "transnet/parallel.hpp"
#include "transnet/reference_ops.hpp"

using namespace transnet;
using testing::random_tensor;

namespace {

Tensor64 identity_kernel(std::size_t channels) {
    Tensor64 w({3, 3, 3, channels, channels});
    for (std::size_t c = 0; c < channels; ++c) w[((1 * 3 + 1) * 3 + 1) * channels * channels + c * channels + c] = 1;
    return w;
}

template <typename T>
double max_diff(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    REQUIRE(a.shape() == b.shape());
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(double(a[i]) - double(b[i])));
    return m;
}

}  // namespace

TEST_CASE("tensor rejects inconsistent construction") {
    CHECK_THROWS_AS(Tensor({2, 0, 3}), ShapeError);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<float>(3)), ShapeError);
    const Tensor t({2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
    CHECK(t.reshaped({3, 2}).shape() == Shape{3, 2});
    CHECK(t.reshaped({3, 2})[4] == 5);
    CHECK_THROWS_AS(t.reshaped({4, 2}), ShapeError);
}

TEST_CASE("conv3d identity kernel passes a single value through") {
    const Tensor64 x({1, 1, 1, 1}, std::vector<double>{3.25});
    const Tensor64 y = conv3d_forward(x, identity_kernel(1), Tensor64({1}), 1);
    CHECK(y.shape() == Shape{1, 1, 1, 1});
    CHECK(y[0] == 3.25);
}

TEST_CASE("conv3d temporal profile of all-ones input uses zero padding") {
    const Tensor x({5, 1, 1, 1}, 1.0f);
    const Tensor y = conv3d_forward(x, Tensor({3, 3, 3, 1, 1}, 1.0f), Tensor({1}), 1);
    CHECK(y.values() == std::vector<float>{2, 3, 3, 3, 2});
}

TEST_CASE("conv3d impulse spreads only to dilated taps") {
    for (int d : {1, 2, 4, 8}) {
        Tensor x({17, 1, 1, 1});
        x[8] = 1;
        const Tensor y = conv3d_forward(x, Tensor({3, 3, 3, 1, 1}, 1.0f), Tensor({1}), d);
        for (int t = 0; t < 17; ++t) {
            const bool tap = t == 8 || t == 8 - d || t == 8 + d;
            CAPTURE(d);
            CAPTURE(t);
            CHECK((y[static_cast<std::size_t>(t)] != 0) == tap);
        }
    }
}

TEST_CASE("conv3d rejects mismatched shapes with both shapes in the message") {
    const Tensor x({4, 3, 3, 2});
    try {
        conv3d_forward(x, Tensor({3, 3, 3, 3, 4}), Tensor({4}), 1);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[4,3,3,2]") != std::string::npos);
        CHECK(msg.find("[3,3,3,3,4]") != std::string::npos);
    }
    CHECK_THROWS_AS(conv3d_forward(x, Tensor({3, 3, 3, 2, 4}), Tensor({5}), 1), ShapeError);
    CHECK_THROWS_AS(conv3d_forward(x, Tensor({3, 3, 2, 2, 4}), Tensor({4}), 1), ShapeError);
    CHECK_THROWS_AS(conv3d_forward(x, Tensor({3, 3, 3, 2, 4}), Tensor({4}), 0), ShapeError);
    CHECK_THROWS_AS(conv3d_backward(x, Tensor({3, 3, 3, 2, 4}), 1, Tensor({4, 3, 3, 3})), ShapeError);
}

TEST_CASE("conv3d is linear in its input") {
    std::mt19937_64 rng(1);
    const auto x = random_tensor<double>({5, 4, 3, 2}, rng);
    const auto z = random_tensor<double>({5, 4, 3, 2}, rng);
    const auto w = random_tensor<double>({3, 3, 3, 2, 3}, rng);
    const Tensor64 b({3});
    Tensor64 mix(x.shape());
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = 1.5 * x[i] - 0.75 * z[i];
    const auto fx = conv3d_forward(x, w, b, 2);
    const auto fz = conv3d_forward(z, w, b, 2);
    const auto fm = conv3d_forward(mix, w, b, 2);
    for (std::size_t i = 0; i < fm.size(); ++i) CHECK(fm[i] == doctest::Approx(1.5 * fx[i] - 0.75 * fz[i]).epsilon(1e-9));
}

TEST_CASE("conv3d backward with zero upstream gradient is zero") {
    std::mt19937_64 rng(2);
    const auto x = random_tensor<float>({4, 3, 3, 2}, rng);
    const auto w = random_tensor<float>({3, 3, 3, 2, 3}, rng);
    const auto g = conv3d_backward(x, w, 1, Tensor({4, 3, 3, 3}));
    for (float v : g.input.values()) CHECK(v == 0);
    for (float v : g.weights.values()) CHECK(v == 0);
    for (float v : g.bias.values()) CHECK(v == 0);
}

TEST_CASE("conv3d identity kernel backward passes the gradient through") {
    std::mt19937_64 rng(3);
    const auto x = random_tensor<double>({4, 3, 2, 2}, rng);
    const auto g = random_tensor<double>({4, 3, 2, 2}, rng);
    const auto grads = conv3d_backward(x, identity_kernel(2), 4, g);
    CHECK(grads.input == g);
}

TEST_CASE("conv3d gradients match finite differences") {
    std::mt19937_64 rng(4);
    auto x = random_tensor<double>({6, 4, 4, 2}, rng);
    auto w = random_tensor<double>({3, 3, 3, 2, 3}, rng);
    auto b = random_tensor<double>({3}, rng);
    const auto r = random_tensor<double>({6, 4, 4, 3}, rng);
    const auto loss = [&] { return testing::project(conv3d_forward(x, w, b, 2), r); };
    const auto g = conv3d_backward(x, w, 2, r);
    double worst = 0;
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, testing::relative_error(g.input[i], testing::central_difference(x, i, loss)));
    for (std::size_t i = 0; i < w.size(); ++i) worst = std::max(worst, testing::relative_error(g.weights[i], testing::central_difference(w, i, loss)));
    for (std::size_t i = 0; i < b.size(); ++i) worst = std::max(worst, testing::relative_error(g.bias[i], testing::central_difference(b, i, loss)));
    CHECK(worst < 1e-6);
    // grad_bias[c] is the sum of grad_out over channel c.
    for (std::size_t c = 0; c < 3; ++c) {
        double s = 0;
        for (std::size_t i = c; i < r.size(); i += 3) s += r[i];
        CHECK(g.bias[c] == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("maxpool forward takes the window maximum with floor extents") {
    const Tensor x({1, 2, 2, 1}, std::vector<float>{1, 5, 3, 2});
    const Tensor y = maxpool3d_forward(x);
    CHECK(y.shape() == Shape{1, 1, 1, 1});
    CHECK(y[0] == 5);
    CHECK(maxpool3d_forward(Tensor({2, 27, 48, 3})).shape() == Shape{2, 13, 24, 3});
    for (std::size_t h = 2; h <= 9; ++h)
        for (std::size_t w = 2; w <= 9; ++w) CHECK(maxpool3d_forward(Tensor({1, h, w, 2})).shape() == Shape{1, h / 2, w / 2, 2});
    const Tensor c = maxpool3d_forward(Tensor({3, 5, 7, 2}, 0.625f));
    for (float v : c.values()) CHECK(v == 0.625f);
    CHECK_THROWS_AS(maxpool3d_forward(Tensor({1, 1, 4, 1})), ShapeError);
    CHECK_THROWS_AS(maxpool3d_forward(Tensor({1, 4, 1, 1})), ShapeError);
}

TEST_CASE("maxpool backward routes to the argmax, first on ties") {
    const Tensor g({1, 1, 1, 1}, std::vector<float>{2.5f});
    CHECK(maxpool3d_backward(Tensor({1, 2, 2, 1}, std::vector<float>{1, 5, 3, 2}), g).values() ==
          std::vector<float>{0, 2.5f, 0, 0});
    CHECK(maxpool3d_backward(Tensor({1, 2, 2, 1}, std::vector<float>{7, 7, 0, 0}), g).values() ==
          std::vector<float>{2.5f, 0, 0, 0});
    CHECK(maxpool3d_backward(Tensor({1, 2, 2, 1}, std::vector<float>{0, 0, 7, 7}), g).values() ==
          std::vector<float>{0, 0, 2.5f, 0});
    CHECK_THROWS_AS(maxpool3d_backward(Tensor({1, 2, 2, 1}), Tensor({1, 1, 2, 1})), ShapeError);
}

TEST_CASE("maxpool gradients match finite differences") {
    std::mt19937_64 rng(5);
    auto x = random_tensor<double>({4, 6, 6, 3}, rng);
    const auto r = random_tensor<double>({4, 3, 3, 3}, rng);
    const auto loss = [&] { return testing::project(maxpool3d_forward(x), r); };
    const auto g = maxpool3d_backward(x, r);
    double worst = 0;
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, testing::relative_error(g[i], testing::central_difference(x, i, loss)));
    CHECK(worst < 1e-6);
}

TEST_CASE("dense forward is a shared row-wise affine map") {
    Tensor64 eye({3, 3});
    for (std::size_t i = 0; i < 3; ++i) eye[i * 3 + i] = 1;
    std::mt19937_64 rng(6);
    const auto x = random_tensor<double>({4, 3}, rng);
    CHECK(dense_forward(x, eye, Tensor64({3})) == x);

    const Tensor64 twin({2, 3}, std::vector<double>{0.5, -1, 2, 0.5, -1, 2});
    const auto w = random_tensor<double>({3, 5}, rng);
    const auto b = random_tensor<double>({5}, rng);
    const auto y = dense_forward(twin, w, b);
    for (std::size_t j = 0; j < 5; ++j) CHECK(y[j] == y[5 + j]);
    CHECK_THROWS_AS(dense_forward(x, Tensor64({4, 2}), Tensor64({2})), ShapeError);
    CHECK_THROWS_AS(dense_forward(x, Tensor64({3, 2}), Tensor64({3})), ShapeError);
}

TEST_CASE("dense gradients match finite differences") {
    std::mt19937_64 rng(7);
    auto x = random_tensor<double>({5, 7}, rng);
    auto w = random_tensor<double>({7, 4}, rng);
    auto b = random_tensor<double>({4}, rng);
    const auto r = random_tensor<double>({5, 4}, rng);
    const auto loss = [&] { return testing::project(dense_forward(x, w, b), r); };
    const auto g = dense_backward(x, w, r);
    double worst = 0;
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, testing::relative_error(g.input[i], testing::central_difference(x, i, loss)));
    for (std::size_t i = 0; i < w.size(); ++i) worst = std::max(worst, testing::relative_error(g.weights[i], testing::central_difference(w, i, loss)));
    for (std::size_t i = 0; i < b.size(); ++i) worst = std::max(worst, testing::relative_error(g.bias[i], testing::central_difference(b, i, loss)));
    CHECK(worst < 1e-6);
}

TEST_CASE("relu and its gradient") {
    const Tensor x({3}, std::vector<float>{-1, 0, 2});
    CHECK(relu(x).values() == std::vector<float>{0, 0, 2});
    CHECK(relu_backward(x, Tensor({3}, 5.0f)).values() == std::vector<float>{0, 0, 5});

    std::mt19937_64 rng(8);
    auto v = random_tensor<double>({40}, rng);
    for (double& e : v.data()) {
        if (std::fabs(e) < 1e-3) e = 0.5;  // keep away from the kink
    }
    const auto r = random_tensor<double>({40}, rng);
    const auto loss = [&] { return testing::project(relu(v), r); };
    const auto g = relu_backward(v, r);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(testing::relative_error(g[i], testing::central_difference(v, i, loss)) < 1e-6);
}

TEST_CASE("softmax rows") {
    const Tensor64 s = softmax_rows(Tensor64({3, 2}, std::vector<double>{0, 0, 1000, 1000, 0, std::log(3.0)}));
    CHECK(s[0] == doctest::Approx(0.5));
    CHECK(s[1] == doctest::Approx(0.5));
    CHECK(s[2] == doctest::Approx(0.5));
    CHECK(s[3] == doctest::Approx(0.5));
    CHECK(s[4] == doctest::Approx(0.25));
    CHECK(s[5] == doctest::Approx(0.75));

    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> wide(-1e4, 1e4);
    Tensor rows({200, 2});
    for (float& v : rows.data()) v = static_cast<float>(wide(rng));
    rows[0] = 1e4f;
    rows[1] = -1e4f;
    const Tensor p = softmax_rows(rows);
    for (std::size_t i = 0; i < 200; ++i) {
        CHECK(p[2 * i] >= 0);
        CHECK(p[2 * i + 1] >= 0);
        CHECK(std::fabs(double(p[2 * i]) + p[2 * i + 1] - 1.0) <= 1e-6);
    }
}

TEST_CASE("cross entropy from logits") {
    const auto ce = cross_entropy_from_logits(Tensor64({1, 2}), {false});
    CHECK(ce.loss == doctest::Approx(std::log(2.0)));

    double previous = std::numeric_limits<double>::infinity();
    for (double gap : {0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0}) {
        const double loss = cross_entropy_from_logits(Tensor64({1, 2}, std::vector<double>{0, gap}), {true}).loss;
        CHECK(loss < previous);
        CHECK(loss >= 0);
        previous = loss;
    }
    CHECK(previous < 1e-15);

    std::mt19937_64 rng(10);
    auto logits = random_tensor<double>({7, 2}, rng, 2.0);
    const std::vector<bool> labels{true, false, false, true, false, true, false};
    const auto loss = [&] { return cross_entropy_from_logits(logits, labels).loss; };
    const auto g = cross_entropy_from_logits(logits, labels).grad_logits;
    for (std::size_t i = 0; i < logits.size(); ++i) CHECK(testing::relative_error(g[i], testing::central_difference(logits, i, loss)) < 1e-6);

    CHECK_THROWS_AS(cross_entropy_from_logits(Tensor64({2, 2}), {true}), ShapeError);
    Tensor64 bad({1, 2});
    bad[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(cross_entropy_from_logits(bad, {true}), NumericError);
    bad[1] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(cross_entropy_from_logits(bad, {true}), NumericError);
}

TEST_CASE("concat and split channels are inverse") {
    std::mt19937_64 rng(11);
    std::vector<Tensor> parts;
    for (int i = 0; i < 4; ++i) parts.push_back(random_tensor<float>({3, 2, 2, 5}, rng));
    const Tensor joined = concat_channels(parts);
    CHECK(joined.shape() == Shape{3, 2, 2, 20});
    CHECK(joined[5] == parts[1][0]);
    CHECK(split_channels(joined, 4) == parts);
    CHECK_THROWS_AS(split_channels(joined, 3), ShapeError);
}

TEST_CASE("parallel kernels agree with the serial reference") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 6; ++trial) {
        const std::size_t t = 3 + trial, h = 2 + trial % 3, w = 3 + trial % 4, cin = 1 + trial % 3, cout = 2 + trial % 2;
        const int d = 1 << (trial % 4);
        const auto x = random_tensor<float>({t, h, w, cin}, rng);
        const auto k = random_tensor<float>({3, 3, 3, cin, cout}, rng);
        const auto b = random_tensor<float>({cout}, rng);
        const auto g = random_tensor<float>({t, h, w, cout}, rng);
        CHECK(conv3d_forward(x, k, b, d) == reference::conv3d_forward(x, k, b, d));
        const auto fast = conv3d_backward(x, k, d, g);
        const auto slow = reference::conv3d_backward(x, k, d, g);
        CHECK(max_diff(fast.input, slow.input) < 1e-4);
        CHECK(max_diff(fast.weights, slow.weights) < 1e-4);
        CHECK(max_diff(fast.bias, slow.bias) < 1e-4);
        CHECK(maxpool3d_forward(x) == reference::maxpool3d_forward(x));
        const auto pg = random_tensor<float>(maxpool3d_forward(x).shape(), rng);
        CHECK(maxpool3d_backward(x, pg) == reference::maxpool3d_backward(x, pg));
        const auto dx = random_tensor<float>({t * h, w * cin}, rng);
        const auto dw = random_tensor<float>({w * cin, cout}, rng);
        CHECK(max_diff(dense_forward(dx, dw, b), reference::dense_forward(dx, dw, b)) < 1e-4);
        const auto dg = random_tensor<float>({t * h, cout}, rng);
        const auto df = dense_backward(dx, dw, dg);
        const auto ds = reference::dense_backward(dx, dw, dg);
        CHECK(max_diff(df.input, ds.input) < 1e-4);
        CHECK(max_diff(df.weights, ds.weights) < 1e-4);
        CHECK(max_diff(df.bias, ds.bias) < 1e-4);
    }
}

TEST_CASE("kernels are bit-identical across thread counts") {
    std::mt19937_64 rng(13);
    const auto x = random_tensor<float>({9, 6, 5, 3}, rng);
    const auto k = random_tensor<float>({3, 3, 3, 3, 4}, rng);
    const auto b = random_tensor<float>({4}, rng);
    const auto g = random_tensor<float>({9, 6, 5, 4}, rng);
    Tensor y1, y4;
    ConvGrads<float> g1, g4;
    {
        ScopedThreadCount one(1);
        y1 = conv3d_forward(x, k, b, 2);
        g1 = conv3d_backward(x, k, 2, g);
    }
    {
        ScopedThreadCount four(4);
        y4 = conv3d_forward(x, k, b, 2);
        g4 = conv3d_backward(x, k, 2, g);
    }
    CHECK(y1 == y4);
    CHECK(g1.input == g4.input);
    CHECK(g1.weights == g4.weights);
    CHECK(g1.bias == g4.bias);
}
