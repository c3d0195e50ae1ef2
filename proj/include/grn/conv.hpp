#pragma once

#include <array>
#include <cstring>
#include <vector>

#include <cblas.h>

#include "grn/tensor.hpp"

namespace grn {

// Valid (no-padding) grouped 3-d cross-correlation over a C×H×W×T volume.
// groups == in_channels with depth_multiplier m expresses a depthwise layer
// (out_channels == in_channels * m).
struct ConvSpec {
    int in_channels = 1;
    int out_channels = 1;
    int kh = 1, kw = 1, kt = 1;
    int sh = 1, sw = 1, st = 1;
    int groups = 1;
    int depth_multiplier = 1;

    int in_per_group() const { return in_channels / groups; }
    int out_per_group() const { return out_channels / groups; }

    void validate() const {
        if (in_channels <= 0 || out_channels <= 0 || groups <= 0)
            fail(ErrorKind::Parameter, "conv: channel/group counts must be positive");
        if (kh <= 0 || kw <= 0 || kt <= 0 || sh <= 0 || sw <= 0 || st <= 0)
            fail(ErrorKind::Parameter, "conv: kernel and stride must be positive");
        if (in_channels % groups != 0)
            fail(ErrorKind::Parameter, "conv: in_channels not divisible by groups");
        if (out_channels % groups != 0)
            fail(ErrorKind::Parameter, "conv: out_channels not divisible by groups");
        if (groups > 1 && groups == in_channels && out_channels != in_channels * depth_multiplier)
            fail(ErrorKind::Parameter, "conv: depthwise out_channels != in_channels * depth_multiplier");
    }

    static ConvSpec dense3(int in, int out, std::array<int, 3> k, std::array<int, 3> s = {1, 1, 1}) {
        ConvSpec c;
        c.in_channels = in;
        c.out_channels = out;
        c.kh = k[0]; c.kw = k[1]; c.kt = k[2];
        c.sh = s[0]; c.sw = s[1]; c.st = s[2];
        return c;
    }

    static ConvSpec grouped(int in, int out, int groups, std::array<int, 3> k,
                            std::array<int, 3> s = {1, 1, 1}) {
        ConvSpec c = dense3(in, out, k, s);
        c.groups = groups;
        return c;
    }

    static ConvSpec depthwise(int channels, int multiplier, std::array<int, 3> k,
                              std::array<int, 3> s = {1, 1, 1}) {
        ConvSpec c = dense3(channels, channels * multiplier, k, s);
        c.groups = channels;
        c.depth_multiplier = multiplier;
        return c;
    }

    // weights are [out_channels][in_per_group][kh][kw][kt]
    std::vector<int> weight_shape() const { return {out_channels, in_per_group(), kh, kw, kt}; }
};

inline std::array<int, 3> conv_out_dims(int H, int W, int T, const ConvSpec& s) {
    if (H < s.kh) fail(ErrorKind::Dimension, "conv: height extent " + std::to_string(H) +
                                                 " < kernel " + std::to_string(s.kh));
    if (W < s.kw) fail(ErrorKind::Dimension, "conv: width extent " + std::to_string(W) +
                                                 " < kernel " + std::to_string(s.kw));
    if (T < s.kt) fail(ErrorKind::Dimension, "conv: time extent " + std::to_string(T) +
                                                 " < kernel " + std::to_string(s.kt));
    return {(H - s.kh) / s.sh + 1, (W - s.kw) / s.sw + 1, (T - s.kt) / s.st + 1};
}

namespace detail {

// Column buffer cap (doubles); keeps im2col scratch under ~64 MB.
constexpr int64_t kColCap = int64_t(8) << 20;

// Gather one group's receptive fields for samples [n0, n1) into col (K x P*nc),
// column-major over (n, h2, w2, t2).
inline void im2col_group(const double* x, int C, int H, int W, int T, const ConvSpec& s,
                         int g, int n0, int n1, int H2, int W2, int T2, double* col) {
    const int ipg = s.in_per_group();
    const int K = ipg * s.kh * s.kw * s.kt;
    const int64_t P = int64_t(H2) * W2 * T2;
    const int64_t cols = P * (n1 - n0);
    const int64_t chw = int64_t(C) * H * W * T;
    for (int ci = 0; ci < ipg; ++ci) {
        const int c = g * ipg + ci;
        for (int a = 0; a < s.kh; ++a)
            for (int b = 0; b < s.kw; ++b)
                for (int e = 0; e < s.kt; ++e) {
                    const int krow = ((ci * s.kh + a) * s.kw + b) * s.kt + e;
                    double* dst = col + int64_t(krow) * cols;
                    for (int n = n0; n < n1; ++n) {
                        const double* xn = x + int64_t(n) * chw + (int64_t(c) * H * W * T);
                        for (int h = 0; h < H2; ++h)
                            for (int w = 0; w < W2; ++w) {
                                const double* src =
                                    xn + (int64_t(h * s.sh + a) * W + (w * s.sw + b)) * T + e;
                                if (s.st == 1) {
                                    std::memcpy(dst, src, size_t(T2) * sizeof(double));
                                    dst += T2;
                                } else {
                                    for (int t = 0; t < T2; ++t) *dst++ = src[int64_t(t) * s.st];
                                }
                            }
                    }
                }
    }
}

// Inverse of im2col_group: scatter-add col into grad buffer (serial, deterministic).
inline void col2im_group(const double* col, int C, int H, int W, int T, const ConvSpec& s,
                         int g, int n0, int n1, int H2, int W2, int T2, double* gx) {
    const int ipg = s.in_per_group();
    const int64_t P = int64_t(H2) * W2 * T2;
    const int64_t cols = P * (n1 - n0);
    const int64_t chw = int64_t(C) * H * W * T;
    for (int ci = 0; ci < ipg; ++ci) {
        const int c = g * ipg + ci;
        for (int a = 0; a < s.kh; ++a)
            for (int b = 0; b < s.kw; ++b)
                for (int e = 0; e < s.kt; ++e) {
                    const int krow = ((ci * s.kh + a) * s.kw + b) * s.kt + e;
                    const double* src = col + int64_t(krow) * cols;
                    for (int n = n0; n < n1; ++n) {
                        double* gxn = gx + int64_t(n) * chw + (int64_t(c) * H * W * T);
                        for (int h = 0; h < H2; ++h)
                            for (int w = 0; w < W2; ++w) {
                                double* dst =
                                    gxn + (int64_t(h * s.sh + a) * W + (w * s.sw + b)) * T + e;
                                for (int t = 0; t < T2; ++t) dst[int64_t(t) * s.st] += *src++;
                            }
                    }
                }
    }
}

}  // namespace detail

// Batched forward: x is N×C×H×W×T (contiguous), y is N×C'×H'×W'×T'.
inline void conv_forward_batch(const double* x, int N, int C, int H, int W, int T,
                               const ConvSpec& s, const Tensor& weights, const Tensor& bias,
                               double* y) {
    s.validate();
    if (C != s.in_channels) fail(ErrorKind::Dimension, "conv: input has " + std::to_string(C) +
                                                           " channels, spec expects " +
                                                           std::to_string(s.in_channels));
    require_shape(weights, s.weight_shape(), "conv weights");
    require_shape(bias, {s.out_channels}, "conv bias");
    auto [H2, W2, T2] = conv_out_dims(H, W, T, s);
    const int ipg = s.in_per_group(), opg = s.out_per_group();
    const int K = ipg * s.kh * s.kw * s.kt;
    const int64_t P = int64_t(H2) * W2 * T2;
    const int64_t ochw = int64_t(s.out_channels) * P;

    int chunk = int(std::max<int64_t>(1, detail::kColCap / std::max<int64_t>(1, int64_t(K) * P)));
    std::vector<double> col(static_cast<size_t>(K) * P * std::min<int64_t>(chunk, N));
    for (int n0 = 0; n0 < N; n0 += chunk) {
        const int n1 = std::min(N, n0 + chunk);
        const int64_t cols = P * (n1 - n0);
        for (int g = 0; g < s.groups; ++g) {
            detail::im2col_group(x, C, H, W, T, s, g, n0, n1, H2, W2, T2, col.data());
            // scratch for the (opg x cols) product, then scatter rows per sample
            std::vector<double> out(static_cast<size_t>(opg) * cols);
            cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, opg, int(cols), K, 1.0,
                        weights.data.data() + int64_t(g) * opg * K, K, col.data(), int(cols), 0.0,
                        out.data(), int(cols));
            for (int oc = 0; oc < opg; ++oc) {
                const double bv = bias.data[size_t(g * opg + oc)];
                const double* src = out.data() + int64_t(oc) * cols;
                for (int n = n0; n < n1; ++n) {
                    double* dst = y + int64_t(n) * ochw + int64_t(g * opg + oc) * P;
                    const double* sp = src + int64_t(n - n0) * P;
                    for (int64_t p = 0; p < P; ++p) dst[p] = sp[p] + bv;
                }
            }
        }
    }
}

// Batched backward. Any of gx/gw/gb may be null to skip that gradient.
// gw/gb are accumulated into (callers zero them once per step).
inline void conv_backward_batch(const double* gout, const double* x, int N, int C, int H, int W,
                                int T, const ConvSpec& s, const Tensor& weights, double* gx,
                                double* gw, double* gb) {
    s.validate();
    auto [H2, W2, T2] = conv_out_dims(H, W, T, s);
    const int ipg = s.in_per_group(), opg = s.out_per_group();
    const int K = ipg * s.kh * s.kw * s.kt;
    const int64_t P = int64_t(H2) * W2 * T2;
    const int64_t ochw = int64_t(s.out_channels) * P;

    if (gb) {
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < s.out_channels; ++c) {
                const double* src = gout + int64_t(n) * ochw + int64_t(c) * P;
                double acc = 0.0;
                for (int64_t p = 0; p < P; ++p) acc += src[p];
                gb[c] += acc;
            }
    }

    int chunk = int(std::max<int64_t>(1, detail::kColCap / std::max<int64_t>(1, int64_t(K) * P)));
    std::vector<double> col(static_cast<size_t>(K) * P * std::min<int64_t>(chunk, N));
    std::vector<double> gbuf;
    for (int n0 = 0; n0 < N; n0 += chunk) {
        const int n1 = std::min(N, n0 + chunk);
        const int64_t cols = P * (n1 - n0);
        gbuf.resize(size_t(opg) * cols);
        for (int g = 0; g < s.groups; ++g) {
            // gather this group's grad_out rows as (opg x cols)
            for (int oc = 0; oc < opg; ++oc)
                for (int n = n0; n < n1; ++n)
                    std::memcpy(gbuf.data() + int64_t(oc) * cols + int64_t(n - n0) * P,
                                gout + int64_t(n) * ochw + int64_t(g * opg + oc) * P,
                                size_t(P) * sizeof(double));
            if (gw) {
                detail::im2col_group(x, C, H, W, T, s, g, n0, n1, H2, W2, T2, col.data());
                cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, opg, K, int(cols), 1.0,
                            gbuf.data(), int(cols), col.data(), int(cols), 1.0,
                            gw + int64_t(g) * opg * K, K);
            }
            if (gx) {
                cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, K, int(cols), opg, 1.0,
                            weights.data.data() + int64_t(g) * opg * K, K, gbuf.data(), int(cols),
                            0.0, col.data(), int(cols));
                detail::col2im_group(col.data(), C, H, W, T, s, g, n0, n1, H2, W2, T2, gx);
            }
        }
    }
}

// Single-sample wrappers over the batched engine.
inline Tensor conv_forward(const Tensor& input, const ConvSpec& s, const Tensor& weights,
                           const Tensor& bias) {
    if (input.ndim() != 4)
        fail(ErrorKind::Dimension, "conv: expected C×H×W×T input, got " + input.shape_str());
    auto [H2, W2, T2] = conv_out_dims(input.dim(1), input.dim(2), input.dim(3), s);
    Tensor out({s.out_channels, H2, W2, T2});
    conv_forward_batch(input.data.data(), 1, input.dim(0), input.dim(1), input.dim(2),
                       input.dim(3), s, weights, bias, out.data.data());
    return out;
}

struct ConvGrads {
    Tensor input, weights, bias;
};

inline ConvGrads conv_backward(const Tensor& grad_out, const Tensor& cached_input,
                               const ConvSpec& s, const Tensor& weights) {
    if (cached_input.ndim() != 4)
        fail(ErrorKind::Dimension, "conv: expected C×H×W×T input, got " + cached_input.shape_str());
    auto [H2, W2, T2] =
        conv_out_dims(cached_input.dim(1), cached_input.dim(2), cached_input.dim(3), s);
    require_shape(grad_out, {s.out_channels, H2, W2, T2}, "conv grad_out");
    ConvGrads g{Tensor(cached_input.shape), Tensor(s.weight_shape()), Tensor({s.out_channels})};
    conv_backward_batch(grad_out.data.data(), cached_input.data.data(), 1, cached_input.dim(0),
                        cached_input.dim(1), cached_input.dim(2), cached_input.dim(3), s, weights,
                        g.input.data.data(), g.weights.data.data(), g.bias.data.data());
    return g;
}

}  // namespace grn
