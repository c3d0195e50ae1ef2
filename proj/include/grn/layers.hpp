#pragma once

#include <cmath>
#include <vector>

#include "grn/tensor.hpp"

namespace grn {

// ---------------------------------------------------------------------------
// Batch normalization (per channel, population statistics, momentum 0.1).
// Batched buffers are viewed as N×C×P with P the per-channel plane size.
// ---------------------------------------------------------------------------

struct BnParams {
    Tensor gamma, beta;          // learnable, shape {C}
    Tensor running_mean, running_var;
    double momentum = 0.1;
    double eps = 1e-5;
    bool seen = false;  // running stats populated

    explicit BnParams(int channels = 1)
        : gamma({channels}), beta({channels}), running_mean({channels}), running_var({channels}) {
        for (auto& g : gamma.data) g = 1.0;
        for (auto& v : running_var.data) v = 1.0;
    }
    int channels() const { return gamma.dim(0); }
};

struct BnCache {
    std::vector<double> mean, var;  // batch stats used in the forward pass
};

inline void bn_forward(const double* x, int N, int C, int64_t P, BnParams& p, bool train,
                       BnCache* cache, double* y) {
    if (C != p.channels()) fail(ErrorKind::Dimension, "batch_norm: channel count mismatch");
    if (N < 1) fail(ErrorKind::Dimension, "batch_norm: empty batch");
    if (!train && !p.seen)
        fail(ErrorKind::Protocol, "batch_norm: eval mode requires populated running statistics");
    const int64_t M = int64_t(N) * P;
    const int64_t cp = int64_t(C) * P;
    for (int c = 0; c < C; ++c) {
        double mean, var;
        if (train) {
            double s = 0.0;
            for (int n = 0; n < N; ++n) {
                const double* xc = x + n * cp + c * P;
                for (int64_t i = 0; i < P; ++i) s += xc[i];
            }
            mean = s / double(M);
            double s2 = 0.0;
            for (int n = 0; n < N; ++n) {
                const double* xc = x + n * cp + c * P;
                for (int64_t i = 0; i < P; ++i) {
                    const double d = xc[i] - mean;
                    s2 += d * d;
                }
            }
            var = s2 / double(M);
            p.running_mean.data[c] = (1.0 - p.momentum) * p.running_mean.data[c] + p.momentum * mean;
            p.running_var.data[c] = (1.0 - p.momentum) * p.running_var.data[c] + p.momentum * var;
        } else {
            mean = p.running_mean.data[c];
            var = p.running_var.data[c];
        }
        if (cache) {
            if (c == 0) {
                cache->mean.assign(size_t(C), 0.0);
                cache->var.assign(size_t(C), 0.0);
            }
            cache->mean[c] = mean;
            cache->var[c] = var;
        }
        const double inv = 1.0 / std::sqrt(var + p.eps);
        const double g = p.gamma.data[c], b = p.beta.data[c];
        for (int n = 0; n < N; ++n) {
            const double* xc = x + n * cp + c * P;
            double* yc = y + n * cp + c * P;
            for (int64_t i = 0; i < P; ++i) yc[i] = g * (xc[i] - mean) * inv + b;
        }
    }
    if (train) p.seen = true;
}

// Train-mode backward (batch statistics participate in the gradient).
// ggamma/gbeta accumulated; gx overwritten.
inline void bn_backward_train(const double* gy, const double* x, int N, int C, int64_t P,
                              const BnParams& p, const BnCache& cache, double* gx, double* ggamma,
                              double* gbeta) {
    const int64_t M = int64_t(N) * P;
    const int64_t cp = int64_t(C) * P;
    for (int c = 0; c < C; ++c) {
        const double mean = cache.mean[c];
        const double inv = 1.0 / std::sqrt(cache.var[c] + p.eps);
        const double g = p.gamma.data[c];
        double sum_gy = 0.0, sum_gy_xhat = 0.0;
        for (int n = 0; n < N; ++n) {
            const double* gyc = gy + n * cp + c * P;
            const double* xc = x + n * cp + c * P;
            for (int64_t i = 0; i < P; ++i) {
                sum_gy += gyc[i];
                sum_gy_xhat += gyc[i] * (xc[i] - mean) * inv;
            }
        }
        if (ggamma) ggamma[c] += sum_gy_xhat;
        if (gbeta) gbeta[c] += sum_gy;
        const double k = g * inv / double(M);
        for (int n = 0; n < N; ++n) {
            const double* gyc = gy + n * cp + c * P;
            const double* xc = x + n * cp + c * P;
            double* gxc = gx + n * cp + c * P;
            for (int64_t i = 0; i < P; ++i) {
                const double xhat = (xc[i] - mean) * inv;
                gxc[i] = k * (double(M) * gyc[i] - sum_gy - xhat * sum_gy_xhat);
            }
        }
    }
}

// Eval-mode backward (running stats are constants).
inline void bn_backward_eval(const double* gy, const double* x, int N, int C, int64_t P,
                             const BnParams& p, double* gx, double* ggamma, double* gbeta) {
    const int64_t cp = int64_t(C) * P;
    for (int c = 0; c < C; ++c) {
        const double mean = p.running_mean.data[c];
        const double inv = 1.0 / std::sqrt(p.running_var.data[c] + p.eps);
        const double g = p.gamma.data[c];
        double sg = 0.0, sb = 0.0;
        for (int n = 0; n < N; ++n) {
            const double* gyc = gy + n * cp + c * P;
            const double* xc = x + n * cp + c * P;
            double* gxc = gx + n * cp + c * P;
            for (int64_t i = 0; i < P; ++i) {
                sg += gyc[i] * (xc[i] - mean) * inv;
                sb += gyc[i];
                gxc[i] = gyc[i] * g * inv;
            }
        }
        if (ggamma) ggamma[c] += sg;
        if (gbeta) gbeta[c] += sb;
    }
}

// Tensor-level wrapper (first axis is the batch; remaining axes share a channel axis next).
inline Tensor batch_norm(const Tensor& x, BnParams& p, bool train, BnCache* cache = nullptr) {
    if (x.ndim() < 2) fail(ErrorKind::Dimension, "batch_norm: need at least N×C input");
    int64_t plane = 1;
    for (int i = 2; i < x.ndim(); ++i) plane *= x.dim(i);
    Tensor y(x.shape);
    bn_forward(x.data.data(), x.dim(0), x.dim(1), plane, p, train, cache, y.data.data());
    return y;
}

// ---------------------------------------------------------------------------
// ELU (alpha = 1)
// ---------------------------------------------------------------------------

inline void elu_forward(const double* x, int64_t n, double* y) {
    for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : std::expm1(x[i]);
}

// Derivative recovered from the forward output: y+1 on the negative branch.
inline void elu_backward(const double* gy, const double* y, int64_t n, double* gx) {
    for (int64_t i = 0; i < n; ++i) gx[i] = gy[i] * (y[i] > 0.0 ? 1.0 : y[i] + 1.0);
}

inline Tensor elu(const Tensor& x) {
    Tensor y(x.shape);
    elu_forward(x.data.data(), x.size(), y.data.data());
    return y;
}

// ---------------------------------------------------------------------------
// Average pooling over the trailing (time) axis; rows = all leading axes.
// ---------------------------------------------------------------------------

inline int pool_out_extent(int T, int window, int stride) {
    if (window <= 0 || stride <= 0) fail(ErrorKind::Parameter, "avg_pool: window/stride must be positive");
    if (window > T)
        fail(ErrorKind::Dimension, "avg_pool: window " + std::to_string(window) +
                                       " exceeds time extent " + std::to_string(T));
    return (T - window) / stride + 1;
}

inline void avg_pool_time_rows(const double* x, int64_t rows, int T, int window, int stride,
                               double* y) {
    const int T2 = pool_out_extent(T, window, stride);
    const double inv = 1.0 / double(window);
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = x + r * T;
        double* yr = y + int64_t(r) * T2;
        for (int t = 0; t < T2; ++t) {
            double acc = 0.0;
            for (int k = 0; k < window; ++k) acc += xr[t * stride + k];
            yr[t] = acc * inv;
        }
    }
}

inline void avg_pool_time_rows_backward(const double* gy, int64_t rows, int T, int window,
                                        int stride, double* gx) {
    const int T2 = pool_out_extent(T, window, stride);
    const double inv = 1.0 / double(window);
    for (int64_t r = 0; r < rows; ++r) {
        const double* gyr = gy + int64_t(r) * T2;
        double* gxr = gx + r * T;
        for (int64_t i = 0; i < T; ++i) gxr[i] = 0.0;
        for (int t = 0; t < T2; ++t)
            for (int k = 0; k < window; ++k) gxr[t * stride + k] += gyr[t] * inv;
    }
}

inline Tensor avg_pool_time(const Tensor& x, int window, int stride) {
    if (x.ndim() < 1) fail(ErrorKind::Dimension, "avg_pool: empty tensor");
    const int T = x.dim(x.ndim() - 1);
    const int T2 = pool_out_extent(T, window, stride);
    std::vector<int> oshape = x.shape;
    oshape.back() = T2;
    Tensor y(oshape);
    avg_pool_time_rows(x.data.data(), x.size() / T, T, window, stride, y.data.data());
    return y;
}

// ---------------------------------------------------------------------------
// Global average pooling: one mean per channel over all non-channel axes.
// ---------------------------------------------------------------------------

inline void global_avg_pool_batch(const double* x, int N, int C, int64_t P, double* y) {
    const double inv = 1.0 / double(P);
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const double* xc = x + (int64_t(n) * C + c) * P;
            double acc = 0.0;
            for (int64_t i = 0; i < P; ++i) acc += xc[i];
            y[int64_t(n) * C + c] = acc * inv;
        }
}

inline void global_avg_pool_batch_backward(const double* gy, int N, int C, int64_t P, double* gx) {
    const double inv = 1.0 / double(P);
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const double g = gy[int64_t(n) * C + c] * inv;
            double* gxc = gx + (int64_t(n) * C + c) * P;
            for (int64_t i = 0; i < P; ++i) gxc[i] = g;
        }
}

inline Tensor global_avg_pool(const Tensor& x) {
    if (x.ndim() < 2) fail(ErrorKind::Dimension, "global_avg_pool: need C×... input");
    const int C = x.dim(0);
    const int64_t P = x.size() / C;
    Tensor y({C});
    global_avg_pool_batch(x.data.data(), 1, C, P, y.data.data());
    return y;
}

// ---------------------------------------------------------------------------
// Dense layer: y = Wx + b, W is O×F.
// ---------------------------------------------------------------------------

inline void dense_forward_batch(const double* x, int N, const Tensor& W, const Tensor& b,
                                double* y) {
    const int O = W.dim(0), F = W.dim(1);
    for (int n = 0; n < N; ++n) {
        const double* xn = x + int64_t(n) * F;
        double* yn = y + int64_t(n) * O;
        for (int o = 0; o < O; ++o) {
            const double* wr = W.data.data() + int64_t(o) * F;
            double acc = b.data[size_t(o)];
            for (int f = 0; f < F; ++f) acc += wr[f] * xn[f];
            yn[o] = acc;
        }
    }
}

inline void dense_backward_batch(const double* gy, const double* x, int N, const Tensor& W,
                                 double* gx, double* gW, double* gb) {
    const int O = W.dim(0), F = W.dim(1);
    for (int n = 0; n < N; ++n) {
        const double* gyn = gy + int64_t(n) * O;
        const double* xn = x + int64_t(n) * F;
        if (gx) {
            double* gxn = gx + int64_t(n) * F;
            for (int f = 0; f < F; ++f) gxn[f] = 0.0;
            for (int o = 0; o < O; ++o) {
                const double* wr = W.data.data() + int64_t(o) * F;
                for (int f = 0; f < F; ++f) gxn[f] += gyn[o] * wr[f];
            }
        }
        for (int o = 0; o < O; ++o) {
            if (gW) {
                double* gwr = gW + int64_t(o) * F;
                for (int f = 0; f < F; ++f) gwr[f] += gyn[o] * xn[f];
            }
            if (gb) gb[o] += gyn[o];
        }
    }
}

inline Tensor dense(const Tensor& x, const Tensor& W, const Tensor& b) {
    if (x.ndim() != 1 || W.ndim() != 2 || W.dim(1) != x.dim(0))
        fail(ErrorKind::Dimension, "dense: W is " + W.shape_str() + ", x is " + x.shape_str());
    require_shape(b, {W.dim(0)}, "dense bias");
    Tensor y({W.dim(0)});
    dense_forward_batch(x.data.data(), 1, W, b, y.data.data());
    return y;
}

// ---------------------------------------------------------------------------
// Activations and the pairwise MSE loss.
// ---------------------------------------------------------------------------

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Max-subtracted softmax; sums to 1 within 1e-12.
inline std::vector<double> softmax(const std::vector<double>& scores) {
    if (scores.empty()) fail(ErrorKind::Parameter, "softmax: empty input");
    double mx = scores[0];
    for (double s : scores) mx = std::max(mx, s);
    std::vector<double> p(scores.size());
    double z = 0.0;
    for (size_t i = 0; i < scores.size(); ++i) {
        p[i] = std::exp(scores[i] - mx);
        z += p[i];
    }
    for (double& v : p) v /= z;
    return p;
}

// J = (r - 1(same_class))^2 ; dJ/dr = 2 (r - indicator)
inline double mse_pair_loss(double r, bool same_class, double* grad = nullptr) {
    const double ind = same_class ? 1.0 : 0.0;
    if (grad) *grad = 2.0 * (r - ind);
    return (r - ind) * (r - ind);
}

}  // namespace grn
