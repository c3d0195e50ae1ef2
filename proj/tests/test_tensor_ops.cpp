#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "grn/adam.hpp"
#include "grn/conv.hpp"
#include "grn/gradcheck.hpp"
#include "grn/layers.hpp"
#include "grn/rng.hpp"

using namespace grn;

namespace {

// quadruple-loop reference convolution, valid padding, grouped
Tensor conv_ref(const Tensor& x, const ConvSpec& s, const Tensor& w, const Tensor& b) {
    const auto [H2, W2, T2] = conv_out_dims(x.dim(1), x.dim(2), x.dim(3), s);
    const int H = x.dim(1), W = x.dim(2), T = x.dim(3);
    const int ipg = s.in_per_group(), opg = s.out_per_group();
    Tensor y({s.out_channels, H2, W2, T2});
    for (int oc = 0; oc < s.out_channels; ++oc) {
        const int g = oc / opg;
        for (int oh = 0; oh < H2; ++oh)
            for (int ow = 0; ow < W2; ++ow)
                for (int ot = 0; ot < T2; ++ot) {
                    double acc = b.data[static_cast<size_t>(oc)];
                    for (int ic = 0; ic < ipg; ++ic)
                        for (int kh = 0; kh < s.kh; ++kh)
                            for (int kw = 0; kw < s.kw; ++kw)
                                for (int kt = 0; kt < s.kt; ++kt) {
                                    const int c = g * ipg + ic;
                                    const int64_t xi =
                                        ((int64_t(c) * H + oh * s.sh + kh) * W + ow * s.sw + kw) *
                                            T +
                                        ot * s.st + kt;
                                    const int64_t wi =
                                        ((int64_t(oc) * ipg + ic) * s.kh + kh) * int64_t(s.kw * s.kt) +
                                        int64_t(kw) * s.kt + kt;
                                    acc += x.data[static_cast<size_t>(xi)] * w.data[static_cast<size_t>(wi)];
                                }
                    y.data[static_cast<size_t>(((int64_t(oc) * H2 + oh) * W2 + ow) * T2 + ot)] = acc;
                }
    }
    return y;
}

ConvSpec random_spec(SplitMix64& rng) {
    const int groups = 1 + int(rng.below(3));
    const int ipg = 1 + int(rng.below(3));
    const int opg = 1 + int(rng.below(3));
    ConvSpec s = ConvSpec::grouped(groups * ipg, groups * opg, groups,
                                   {1 + int(rng.below(2)), 1 + int(rng.below(2)), 1 + int(rng.below(4))},
                                   {1, 1, 1 + int(rng.below(3))});
    if (groups == s.in_channels) s.depth_multiplier = opg;
    return s;
}

void fill(Tensor& t, SplitMix64& rng) {
    for (auto& v : t.data) v = rng.gaussian();
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    double m = 0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("conv matches quadruple-loop reference on 200 random instances") {
    SplitMix64 rng(42);
    for (int it = 0; it < 200; ++it) {
        const ConvSpec s = random_spec(rng);
        const int H = s.kh + int(rng.below(3));
        const int W = s.kw + int(rng.below(3));
        const int T = s.kt + int(rng.below(9));
        Tensor x({s.in_channels, H, W, T}), w(s.weight_shape()), b({s.out_channels});
        fill(x, rng);
        fill(w, rng);
        fill(b, rng);
        const Tensor got = conv_forward(x, s, w, b);
        const Tensor want = conv_ref(x, s, w, b);
        CHECK(max_abs_diff(got.data, want.data) <= 1e-12);
    }
}

TEST_CASE("conv output dims and errors") {
    ConvSpec s = ConvSpec::dense3(1, 36, {1, 1, 65});
    auto d = conv_out_dims(5, 5, 750, s);
    CHECK(d[0] == 5);
    CHECK(d[1] == 5);
    CHECK(d[2] == 686);

    s = ConvSpec::depthwise(72, 1, {1, 1, 65}, {1, 1, 10});
    d = conv_out_dims(1, 1, 686, s);
    CHECK(d[2] == 63);

    CHECK_THROWS_AS((void)conv_out_dims(1, 1, 10, ConvSpec::dense3(1, 1, {1, 1, 11})), Error);
    CHECK_THROWS_AS((void)ConvSpec::grouped(5, 4, 2, {1, 1, 1}).validate(), Error);
}

TEST_CASE("conv gradients against finite differences") {
    SplitMix64 rng(7);
    for (int it = 0; it < 10; ++it) {
        const ConvSpec s = random_spec(rng);
        const int H = s.kh, W = s.kw, T = s.kt + 4;
        Tensor x({s.in_channels, H, W, T}), w(s.weight_shape()), b({s.out_channels});
        fill(x, rng);
        fill(w, rng);
        fill(b, rng);
        Tensor gy; // fixed cotangent: loss = sum(y * gy)
        {
            auto dd = conv_out_dims(H, W, T, s);
            gy = Tensor({s.out_channels, dd[0], dd[1], dd[2]});
            fill(gy, rng);
        }
        auto loss = [&]() {
            const Tensor y = conv_forward(x, s, w, b);
            double l = 0;
            for (size_t i = 0; i < y.data.size(); ++i) l += y.data[i] * gy.data[i];
            return l;
        };
        auto g = conv_backward(gy, x, s, w);
        x.grad = g.input.data;
        w.grad = g.weights.data;
        b.grad = g.bias.data;
        std::vector<ParamRef> params{{"x", &x}, {"w", &w}, {"b", &b}};
        CHECK(grad_check(loss, params) < 1e-4);
    }
}

TEST_CASE("batch norm forward statistics and backward gradients") {
    SplitMix64 rng(11);
    const int N = 4, C = 3;
    const int64_t P = 6;
    Tensor x({N, C, int(P)});
    fill(x, rng);

    BnParams p(C);
    for (auto& g : p.gamma.data) g = 0.5 + rng.uniform();
    for (auto& b : p.beta.data) b = rng.gaussian();

    SUBCASE("train mode output has zero mean / unit variance per channel pre-affine") {
        BnParams id(C);
        std::vector<double> y(x.data.size());
        bn_forward(x.data.data(), N, C, P, id, true, nullptr, y.data());
        for (int c = 0; c < C; ++c) {
            double m = 0, v = 0;
            for (int n = 0; n < N; ++n)
                for (int64_t i = 0; i < P; ++i) m += y[static_cast<size_t>((int64_t(n) * C + c) * P + i)];
            m /= double(N * P);
            for (int n = 0; n < N; ++n)
                for (int64_t i = 0; i < P; ++i) {
                    const double d = y[static_cast<size_t>((int64_t(n) * C + c) * P + i)] - m;
                    v += d * d;
                }
            v /= double(N * P);
            CHECK(std::abs(m) < 1e-12);
            CHECK(std::abs(v - 1.0) < 1e-3);  // eps shrinks variance slightly
        }
    }

    SUBCASE("eval before any training batch is a protocol error") {
        BnParams fresh(C);
        std::vector<double> y(x.data.size());
        CHECK_THROWS_AS(bn_forward(x.data.data(), N, C, P, fresh, false, nullptr, y.data()), Error);
    }

    SUBCASE("train-mode gradient vs finite differences") {
        Tensor gy(x.shape);
        fill(gy, rng);
        auto loss = [&]() {
            BnParams q(C);
            q.gamma.data = p.gamma.data;
            q.beta.data = p.beta.data;
            std::vector<double> y(x.data.size());
            bn_forward(x.data.data(), N, C, P, q, true, nullptr, y.data());
            double l = 0;
            for (size_t i = 0; i < y.size(); ++i) l += y[i] * gy.data[i];
            return l;
        };
        BnParams q(C);
        q.gamma.data = p.gamma.data;
        q.beta.data = p.beta.data;
        BnCache cache;
        std::vector<double> y(x.data.size());
        bn_forward(x.data.data(), N, C, P, q, true, &cache, y.data());
        x.ensure_grad();
        q.gamma.ensure_grad();
        q.beta.ensure_grad();
        bn_backward_train(gy.data.data(), x.data.data(), N, C, P, q, cache, x.grad.data(),
                          q.gamma.grad.data(), q.beta.grad.data());
        p.gamma.grad = q.gamma.grad;
        p.beta.grad = q.beta.grad;
        std::vector<ParamRef> params{{"x", &x}, {"gamma", &p.gamma}, {"beta", &p.beta}};
        CHECK(grad_check(loss, params) < 1e-4);
    }
}

TEST_CASE("elu, pooling, dense, sigmoid gradients") {
    SplitMix64 rng(13);

    SUBCASE("elu") {
        Tensor x({40});
        fill(x, rng);
        Tensor gy({40});
        fill(gy, rng);
        auto loss = [&]() {
            const Tensor y = elu(x);
            double l = 0;
            for (size_t i = 0; i < y.data.size(); ++i) l += y.data[i] * gy.data[i];
            return l;
        };
        const Tensor y = elu(x);
        x.ensure_grad();
        elu_backward(gy.data.data(), y.data.data(), x.size(), x.grad.data());
        std::vector<ParamRef> params{{"x", &x}};
        CHECK(grad_check(loss, params) < 1e-4);
    }

    SUBCASE("average pool equals reference and gradient is uniform") {
        Tensor x({2, 3, 10});
        fill(x, rng);
        const Tensor y = avg_pool_time(x, 2, 2);
        CHECK(y.dim(2) == 5);
        for (int r = 0; r < 6; ++r)
            for (int t = 0; t < 5; ++t)
                CHECK(y.data[static_cast<size_t>(r * 5 + t)] ==
                      doctest::Approx(0.5 * (x.data[static_cast<size_t>(r * 10 + 2 * t)] +
                                             x.data[static_cast<size_t>(r * 10 + 2 * t + 1)]))
                          .epsilon(1e-14));
    }

    SUBCASE("dense layer gradient") {
        Tensor x({3, 5}), W({4, 5}), b({4});
        fill(x, rng);
        fill(W, rng);
        fill(b, rng);
        Tensor gy({3, 4});
        fill(gy, rng);
        auto loss = [&]() {
            std::vector<double> y(12);
            dense_forward_batch(x.data.data(), 3, W, b, y.data());
            double l = 0;
            for (size_t i = 0; i < y.size(); ++i) l += y[i] * gy.data[i];
            return l;
        };
        x.ensure_grad();
        W.ensure_grad();
        b.ensure_grad();
        dense_backward_batch(gy.data.data(), x.data.data(), 3, W, x.grad.data(), W.grad.data(),
                             b.grad.data());
        std::vector<ParamRef> params{{"x", &x}, {"W", &W}, {"b", &b}};
        CHECK(grad_check(loss, params) < 1e-4);
    }
}

TEST_CASE("softmax properties and brute-force equality") {
    SplitMix64 rng(17);
    for (int it = 0; it < 200; ++it) {
        const int K = 2 + int(rng.below(6));
        std::vector<double> s(static_cast<size_t>(K));
        for (auto& v : s) v = 10.0 * rng.gaussian();
        const auto p = softmax(s);
        double sum = 0;
        std::vector<double> ref(static_cast<size_t>(K));
        double z = 0;
        for (int k = 0; k < K; ++k) z += std::exp(s[static_cast<size_t>(k)]);
        for (int k = 0; k < K; ++k) ref[static_cast<size_t>(k)] = std::exp(s[static_cast<size_t>(k)]) / z;
        for (int k = 0; k < K; ++k) {
            CHECK(p[static_cast<size_t>(k)] > 0.0);
            CHECK(std::abs(p[static_cast<size_t>(k)] - ref[static_cast<size_t>(k)]) <= 1e-12);
            sum += p[static_cast<size_t>(k)];
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
    // shift invariance
    std::vector<double> a{1.0, 2.0, 3.0};
    std::vector<double> b{101.0, 102.0, 103.0};
    const auto pa = softmax(a), pb = softmax(b);
    for (int k = 0; k < 3; ++k) CHECK(pa[static_cast<size_t>(k)] == doctest::Approx(pb[static_cast<size_t>(k)]).epsilon(1e-12));
}

TEST_CASE("pair loss") {
    double g = 0;
    CHECK(mse_pair_loss(1.0, true, &g) == 0.0);
    CHECK(g == 0.0);
    CHECK(mse_pair_loss(0.0, false, &g) == 0.0);
    CHECK(mse_pair_loss(0.25, true, &g) == doctest::Approx(0.5625));
    CHECK(g == doctest::Approx(-1.5));
    CHECK(mse_pair_loss(0.25, false, &g) == doctest::Approx(0.0625));
    CHECK(g == doctest::Approx(0.5));
}

TEST_CASE("adam reproduces a reference implementation") {
    // scalar quadratic: g = x, reference iterates hand-rolled here with the
    // same hyper-parameters
    Tensor x({1});
    x.data[0] = 1.0;
    x.ensure_grad();
    std::vector<ParamRef> params{{"x", &x}};
    AdamState opt;
    opt.init(params);

    double rx = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 50; ++t) {
        x.grad[0] = x.data[0];
        opt.update(params);

        const double g = rx;
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mh = m / (1.0 - std::pow(0.9, t));
        const double vh = v / (1.0 - std::pow(0.999, t));
        rx -= 1e-3 * mh / (std::sqrt(vh) + 1e-8);
        CHECK(x.data[0] == doctest::Approx(rx).epsilon(1e-12));
    }

    SUBCASE("non-finite gradient names the offending block") {
        x.grad[0] = std::numeric_limits<double>::quiet_NaN();
        try {
            opt.update(params);
            FAIL("expected divergence error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Divergence);
            CHECK(std::string(e.what()).find("x") != std::string::npos);
        }
    }
}

TEST_CASE("splitmix64 reference vector") {
    // seed 1234567 stream from the published reference implementation
    SplitMix64 rng(1234567);
    CHECK(rng.next() == 6457827717110365317ULL);
    CHECK(rng.next() == 3203168211198807973ULL);
    CHECK(rng.next() == 9817491932198370423ULL);
    SplitMix64 again(1234567);
    CHECK(again.next() == 6457827717110365317ULL);
}

TEST_CASE("sampling without replacement") {
    SplitMix64 rng(5);
    auto s = sample_without_replacement(10, 10, rng);
    std::sort(s.begin(), s.end());
    for (int i = 0; i < 10; ++i) CHECK(s[static_cast<size_t>(i)] == i);
    auto t = sample_without_replacement(50, 5, rng);
    CHECK(t.size() == 5);
    std::sort(t.begin(), t.end());
    CHECK(std::unique(t.begin(), t.end()) == t.end());
}
