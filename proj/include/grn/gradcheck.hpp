#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "grn/adam.hpp"
#include "grn/rng.hpp"
#include "grn/tensor.hpp"

namespace grn {

// Central finite differences against the analytic gradients already stored on
// each parameter tensor. `loss` must be a pure function of the current
// parameter values. Returns the worst relative error, denominator floored at 1e-8.
inline double grad_check(const std::function<double()>& loss, const std::vector<ParamRef>& params,
                         double h = 1e-5) {
    if (!(h > 0.0)) fail(ErrorKind::Parameter, "grad_check: h must be positive");
    double worst = 0.0;
    for (const auto& p : params) {
        Tensor& t = *p.tensor;
        if (t.grad.size() != t.data.size())
            fail(ErrorKind::Parameter, "grad_check: missing analytic gradient for " + p.name);
        for (size_t i = 0; i < t.data.size(); ++i) {
            const double saved = t.data[i];
            t.data[i] = saved + h;
            const double lp = loss();
            t.data[i] = saved - h;
            const double lm = loss();
            t.data[i] = saved;
            const double fd = (lp - lm) / (2.0 * h);
            const double denom = std::max({std::abs(fd), std::abs(t.grad[i]), 1e-8});
            worst = std::max(worst, std::abs(fd - t.grad[i]) / denom);
        }
    }
    return worst;
}

// Spot-check a deterministic pseudo-random subset of parameter entries.
inline double grad_check_sample(const std::function<double()>& loss,
                                const std::vector<ParamRef>& params, int count, uint64_t seed,
                                double h = 1e-5) {
    if (!(h > 0.0)) fail(ErrorKind::Parameter, "grad_check: h must be positive");
    int64_t total = 0;
    for (const auto& p : params) total += p.tensor->size();
    SplitMix64 rng(seed);
    double worst = 0.0;
    for (int k = 0; k < count; ++k) {
        int64_t pick = int64_t(rng.below(uint64_t(total)));
        for (const auto& p : params) {
            Tensor& t = *p.tensor;
            if (pick >= t.size()) {
                pick -= t.size();
                continue;
            }
            const size_t i = size_t(pick);
            const double saved = t.data[i];
            t.data[i] = saved + h;
            const double lp = loss();
            t.data[i] = saved - h;
            const double lm = loss();
            t.data[i] = saved;
            const double fd = (lp - lm) / (2.0 * h);
            const double denom = std::max({std::abs(fd), std::abs(t.grad[i]), 1e-8});
            worst = std::max(worst, std::abs(fd - t.grad[i]) / denom);
            break;
        }
    }
    return worst;
}

}  // namespace grn
