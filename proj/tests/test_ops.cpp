#include <doctest.h>

#include <cmath>
#include <vector>

#include "msfum/gradcheck.hpp"
#include "msfum/ops.hpp"
#include "msfum/tensor.hpp"

using namespace msfum;

namespace {

// Naive nested-loop oracles, independent of the im2col/GEMM path.

std::vector<float> conv2d_oracle(const TensorF& x, const TensorF& w, const TensorF& b,
                                 int64_t stride, int64_t pad) {
    const int64_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const int64_t cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int64_t ho = (h + 2 * pad - kh) / stride + 1;
    const int64_t wo = (wd + 2 * pad - kw) / stride + 1;
    std::vector<float> out(static_cast<size_t>(n * cout * ho * wo), 0.0f);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t co = 0; co < cout; ++co)
            for (int64_t oy = 0; oy < ho; ++oy)
                for (int64_t ox = 0; ox < wo; ++ox) {
                    float acc = b.data()[static_cast<size_t>(co)];
                    for (int64_t ci = 0; ci < cin; ++ci)
                        for (int64_t ky = 0; ky < kh; ++ky)
                            for (int64_t kx = 0; kx < kw; ++kx) {
                                const int64_t iy = oy * stride + ky - pad;
                                const int64_t ix = ox * stride + kx - pad;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                                acc += x.at({i, ci, iy, ix}) * w.at({co, ci, ky, kx});
                            }
                    out[static_cast<size_t>(((i * cout + co) * ho + oy) * wo + ox)] = acc;
                }
    return out;
}

std::vector<float> conv1d_dw_oracle(const TensorF& x, const TensorF& w, const TensorF& b) {
    const int64_t n = x.dim(0), l = x.dim(1), c = x.dim(2), k = w.dim(1);
    std::vector<float> out(static_cast<size_t>(n * l * c), 0.0f);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t t = 0; t < l; ++t)
            for (int64_t ch = 0; ch < c; ++ch) {
                float acc = b.data()[static_cast<size_t>(ch)];
                for (int64_t j = 0; j < k; ++j) {
                    const int64_t tl = t - (k - 1) + j;
                    if (tl < 0) continue;
                    acc += w.at({ch, j}) * x.at({i, tl, ch});
                }
                out[static_cast<size_t>((i * l + t) * c + ch)] = acc;
            }
    return out;
}

std::vector<float> linear_oracle(const TensorF& x, const TensorF& w, const TensorF& b) {
    const int64_t din = w.dim(1), dout = w.dim(0);
    const int64_t m = x.numel() / din;
    std::vector<float> out(static_cast<size_t>(m * dout), 0.0f);
    for (int64_t i = 0; i < m; ++i)
        for (int64_t o = 0; o < dout; ++o) {
            float acc = b.data()[static_cast<size_t>(o)];
            for (int64_t j = 0; j < din; ++j) {
                acc += x.data()[static_cast<size_t>(i * din + j)] * w.at({o, j});
            }
            out[static_cast<size_t>(i * dout + o)] = acc;
        }
    return out;
}

void check_close(const std::vector<float>& got, const std::vector<float>& want, double tol) {
    REQUIRE(got.size() == want.size());
    double worst = 0.0;
    for (size_t i = 0; i < got.size(); ++i) {
        const double denom = std::max({1.0, std::abs(double(got[i])), std::abs(double(want[i]))});
        worst = std::max(worst, std::abs(double(got[i]) - double(want[i])) / denom);
    }
    CHECK(worst <= tol);
}

}  // namespace

TEST_CASE("conv2d: averaging kernel on constant input") {
    TensorF x = TensorF::full({1, 1, 4, 4}, 1.0f);
    TensorF w = TensorF::full({1, 1, 3, 3}, 1.0f / 9.0f);
    TensorF b = TensorF::zeros({1});
    TensorF y = conv2d(x, w, b, 1, 1);
    CHECK(y.shape() == std::vector<int64_t>{1, 1, 4, 4});
    // interior pixels see the full 3x3 support
    CHECK(y.at({0, 0, 1, 1}) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(y.at({0, 0, 1, 2}) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(y.at({0, 0, 2, 2}) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("conv2d: identity-center kernel at stride 2") {
    TensorF x = TensorF::full({1, 1, 4, 4}, 1.0f);
    std::vector<float> wv(9, 0.0f);
    wv[4] = 1.0f;  // center tap
    TensorF w = TensorF::from_data({1, 1, 3, 3}, wv);
    TensorF b = TensorF::zeros({1});
    TensorF y = conv2d(x, w, b, 2, 1);
    CHECK(y.shape() == std::vector<int64_t>{1, 1, 2, 2});
    for (float v : y.data()) CHECK(v == 1.0f);
}

TEST_CASE("conv2d matches the nested-loop oracle") {
    Rng rng(7);
    TensorF x = TensorF::uniform({1, 2, 5, 5}, rng, -1, 1);
    TensorF w = TensorF::uniform({3, 2, 3, 3}, rng, -1, 1);
    TensorF b = TensorF::uniform({3}, rng, -1, 1);
    for (int64_t stride : {1, 2}) {
        TensorF y = conv2d(x, w, b, stride, 1);
        check_close(y.data(), conv2d_oracle(x, w, b, stride, 1), 1e-6);
        CHECK(all_finite(y));
    }
}

TEST_CASE("conv2d names the offending axis on mismatch") {
    TensorF x = TensorF::zeros({1, 2, 4, 4});
    TensorF w = TensorF::zeros({3, 5, 3, 3});
    TensorF b = TensorF::zeros({3});
    CHECK_THROWS_WITH_AS(conv2d(x, w, b, 1, 1), doctest::Contains("channel axis"),
                         std::invalid_argument);
}

TEST_CASE("conv2d is linear in its input for bias-free kernels") {
    Rng rng(11);
    TensorF x = TensorF::uniform({1, 2, 6, 6}, rng, -1, 1);
    TensorF y = TensorF::uniform({1, 2, 6, 6}, rng, -1, 1);
    TensorF w = TensorF::uniform({3, 2, 3, 3}, rng, -1, 1);
    TensorF b = TensorF::zeros({3});
    const float a = 0.7f, c = -1.3f;
    TensorF lhs = conv2d(add(mul_scalar(x, a), mul_scalar(y, c)), w, b, 1, 1);
    TensorF rhs = add(mul_scalar(conv2d(x, w, b, 1, 1), a), mul_scalar(conv2d(y, w, b, 1, 1), c));
    check_close(lhs.data(), rhs.data(), 1e-6);
}

TEST_CASE("conv1d_depthwise: k=1 unit kernel is the identity") {
    Rng rng(5);
    TensorF x = TensorF::uniform({1, 6, 3}, rng, -1, 1);
    TensorF w = TensorF::full({3, 1}, 1.0f);
    TensorF b = TensorF::zeros({3});
    TensorF y = conv1d_depthwise(x, w, b, true);
    for (size_t i = 0; i < x.data().size(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("conv1d_depthwise: impulse response is the reversed kernel") {
    const int64_t l = 8, k = 4;
    std::vector<float> xv(static_cast<size_t>(l), 0.0f);
    xv[0] = 1.0f;
    TensorF x = TensorF::from_data({1, l, 1}, xv);
    TensorF w = TensorF::from_data({1, k}, {0.1f, 0.2f, 0.3f, 0.4f});
    TensorF b = TensorF::zeros({1});
    TensorF y = conv1d_depthwise(x, w, b, true);
    // out[t] = w[k-1-t] for t in 0..k-1, then 0
    CHECK(y.at({0, 0, 0}) == doctest::Approx(0.4));
    CHECK(y.at({0, 1, 0}) == doctest::Approx(0.3));
    CHECK(y.at({0, 2, 0}) == doctest::Approx(0.2));
    CHECK(y.at({0, 3, 0}) == doctest::Approx(0.1));
    for (int64_t t = k; t < l; ++t) CHECK(y.at({0, t, 0}) == 0.0f);
}

TEST_CASE("conv1d_depthwise matches the loop oracle") {
    Rng rng(19);
    TensorF x = TensorF::uniform({2, 9, 4}, rng, -1, 1);
    TensorF w = TensorF::uniform({4, 4}, rng, -1, 1);
    TensorF b = TensorF::uniform({4}, rng, -1, 1);
    TensorF y = conv1d_depthwise(x, w, b, true);
    check_close(y.data(), conv1d_dw_oracle(x, w, b), 1e-6);
}

TEST_CASE("conv1d_depthwise rejects channel mismatch") {
    TensorF x = TensorF::zeros({1, 4, 3});
    TensorF w = TensorF::zeros({5, 2});
    TensorF b = TensorF::zeros({5});
    CHECK_THROWS_AS(conv1d_depthwise(x, w, b, true), std::invalid_argument);
}

TEST_CASE("linear: identity weight") {
    TensorF x = TensorF::from_data({2, 2}, {1, 2, 3, 4});
    TensorF w = TensorF::from_data({2, 2}, {1, 0, 0, 1});
    TensorF b = TensorF::zeros({2});
    TensorF y = linear(x, w, b);
    for (size_t i = 0; i < 4; ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("linear: hand-computed 2x2 case") {
    TensorF x = TensorF::from_data({1, 2}, {1, 2});
    TensorF w = TensorF::from_data({2, 2}, {1, 1, 1, -1});
    TensorF b = TensorF::zeros({2});
    TensorF y = linear(x, w, b);
    CHECK(y.data()[0] == doctest::Approx(3.0));
    CHECK(y.data()[1] == doctest::Approx(-1.0));
}

TEST_CASE("linear matches the loop oracle and broadcasts over leading axes") {
    Rng rng(23);
    TensorF x = TensorF::uniform({2, 5, 6}, rng, -1, 1);
    TensorF w = TensorF::uniform({4, 6}, rng, -1, 1);
    TensorF b = TensorF::uniform({4}, rng, -1, 1);
    TensorF y = linear(x, w, b);
    CHECK(y.shape() == std::vector<int64_t>{2, 5, 4});
    check_close(y.data(), linear_oracle(x, w, b), 1e-6);
    CHECK_THROWS_AS(linear(TensorF::zeros({2, 5}), w, b), std::invalid_argument);
}

TEST_CASE("activation point values") {
    TensorF x = TensorF::from_data({3}, {0.0f, 0.0f, 50.0f});
    CHECK(silu(x).data()[0] == 0.0f);
    CHECK(sigmoid(x).data()[1] == 0.5f);
    CHECK(softplus(x).data()[2] == doctest::Approx(50.0).epsilon(1e-6));
    // overflow-safe on the negative side too
    TensorF big = TensorF::from_data({1}, {-80.0f});
    CHECK(softplus(big).data()[0] >= 0.0f);
    CHECK(all_finite(softplus(big)));
}

TEST_CASE("layer_norm: constant token maps to beta") {
    TensorF x = TensorF::full({1, 2, 4}, 3.0f);
    TensorF g = TensorF::full({4}, 1.0f);
    TensorF b = TensorF::zeros({4});
    TensorF y = layer_norm(x, g, b, 1e-5f);
    for (float v : y.data()) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("layer_norm: two-channel token") {
    TensorF x = TensorF::from_data({1, 1, 2}, {1.0f, 3.0f});
    TensorF g = TensorF::full({2}, 1.0f);
    TensorF b = TensorF::zeros({2});
    TensorF y = layer_norm(x, g, b, 1e-5f);
    CHECK(y.data()[0] == doctest::Approx(-1.0).epsilon(1e-4));
    CHECK(y.data()[1] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("layer_norm statistics on random input") {
    Rng rng(31);
    TensorF x = TensorF::uniform({2, 8, 16}, rng, -2, 2);
    TensorF g = TensorF::full({16}, 1.0f);
    TensorF b = TensorF::zeros({16});
    TensorF y = layer_norm(x, g, b, 1e-5f);
    for (int64_t t = 0; t < 16; ++t) {
        double mean = 0.0, var = 0.0;
        for (int64_t c = 0; c < 16; ++c) mean += y.data()[static_cast<size_t>(t * 16 + c)];
        mean /= 16.0;
        for (int64_t c = 0; c < 16; ++c) {
            const double d = y.data()[static_cast<size_t>(t * 16 + c)] - mean;
            var += d * d;
        }
        var /= 16.0;
        CHECK(std::abs(mean) <= 1e-6);
        CHECK(std::abs(var - 1.0) <= 1e-4);
    }
}

TEST_CASE("global_avg_pool examples and oracle") {
    TensorF ones = TensorF::full({1, 3, 4, 4}, 1.0f);
    TensorF p = global_avg_pool(ones);
    for (float v : p.data()) CHECK(v == doctest::Approx(1.0));

    std::vector<float> ramp(16);
    for (int i = 0; i < 16; ++i) ramp[static_cast<size_t>(i)] = static_cast<float>(i);
    TensorF r = TensorF::from_data({1, 1, 4, 4}, ramp);
    CHECK(global_avg_pool(r).data()[0] == doctest::Approx(7.5));

    Rng rng(41);
    TensorF x = TensorF::uniform({2, 3, 5, 7}, rng, -1, 1);
    TensorF g = global_avg_pool(x);
    for (int64_t n = 0; n < 2; ++n)
        for (int64_t c = 0; c < 3; ++c) {
            double acc = 0.0;
            for (int64_t y = 0; y < 5; ++y)
                for (int64_t w = 0; w < 7; ++w) acc += x.at({n, c, y, w});
            CHECK(g.at({n, c}) == doctest::Approx(acc / 35.0).epsilon(1e-6));
        }
}

TEST_CASE("concat_channels ordering and gradient split") {
    Rng rng(43);
    TensorF a = TensorF::uniform({1, 2, 2, 2}, rng, -1, 1, true);
    TensorF b = TensorF::uniform({1, 3, 2, 2}, rng, -1, 1, true);
    TensorF one = concat_channels<float>({a});
    for (size_t i = 0; i < a.data().size(); ++i) CHECK(one.data()[i] == a.data()[i]);

    TensorF cat = concat_channels<float>({a, b});
    CHECK(cat.shape() == std::vector<int64_t>{1, 5, 2, 2});
    CHECK(cat.at({0, 0, 1, 1}) == a.at({0, 0, 1, 1}));
    CHECK(cat.at({0, 2, 0, 0}) == b.at({0, 0, 0, 0}));

    // gradient splits back to the parts exactly
    Rng wr(44);
    TensorF weights = TensorF::uniform({1, 5, 2, 2}, wr, 0.5, 1.5);
    backward(sum(mul(cat, weights)));
    for (int64_t c = 0; c < 2; ++c)
        for (int64_t y = 0; y < 2; ++y)
            for (int64_t x = 0; x < 2; ++x)
                CHECK(a.grad()[static_cast<size_t>((c * 2 + y) * 2 + x)] ==
                      weights.at({0, c, y, x}));
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t y = 0; y < 2; ++y)
            for (int64_t x = 0; x < 2; ++x)
                CHECK(b.grad()[static_cast<size_t>((c * 2 + y) * 2 + x)] ==
                      weights.at({0, c + 2, y, x}));

    CHECK_THROWS_AS(concat_channels<float>({a, TensorF::zeros({1, 1, 3, 3})}),
                    std::invalid_argument);
}

TEST_CASE("gradcheck: identity map is exact to 1e-10") {
    Rng rng(51);
    TensorD x = TensorD::uniform({16}, rng, -1, 1);
    auto report = gradcheck([](const TensorD& in) { return in; }, x, 1e-5, 1e-10);
    CHECK(report.pass);
    CHECK(report.max_rel_err <= 1e-10);
}

TEST_CASE("gradcheck: silu near 0.3 passes at 1e-6") {
    TensorD x = TensorD::from_data({1}, {0.3});
    auto report = gradcheck([](const TensorD& in) { return silu(in); }, x, 1e-5, 1e-6);
    CHECK(report.pass);
}

TEST_CASE("no NaN or Inf escapes elementwise ops on finite input") {
    Rng rng(61);
    TensorF x = TensorF::uniform({64}, rng, -60, 60);
    for (Act kind : {Act::silu, Act::sigmoid, Act::relu, Act::softplus}) {
        CHECK(all_finite(activation(x, kind)));
    }
}
