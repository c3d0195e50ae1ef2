#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "grn/tensor.hpp"

namespace grn {

// A named learnable block; Adam and the gradient checker walk these in a
// fixed order so results are reproducible.
struct ParamRef {
    std::string name;
    Tensor* tensor;
};

struct AdamState {
    int64_t step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<std::vector<double>> m, v;  // per-block first/second moments

    void init(const std::vector<ParamRef>& params) {
        step = 0;
        m.clear();
        v.clear();
        for (const auto& p : params) {
            m.emplace_back(p.tensor->data.size(), 0.0);
            v.emplace_back(p.tensor->data.size(), 0.0);
        }
    }

    // Bias-corrected update from the gradients stored on each tensor.
    void update(const std::vector<ParamRef>& params) {
        if (m.size() != params.size()) init(params);
        ++step;
        const double bc1 = 1.0 - std::pow(beta1, double(step));
        const double bc2 = 1.0 - std::pow(beta2, double(step));
        for (size_t b = 0; b < params.size(); ++b) {
            Tensor& t = *params[b].tensor;
            if (t.grad.size() != t.data.size())
                fail(ErrorKind::Parameter, "adam_step: missing gradient for block " + params[b].name);
            if (!all_finite(t.grad))
                fail(ErrorKind::Divergence, "adam_step: non-finite gradient in block " + params[b].name);
            auto& mb = m[b];
            auto& vb = v[b];
            for (size_t i = 0; i < t.data.size(); ++i) {
                const double g = t.grad[i];
                mb[i] = beta1 * mb[i] + (1.0 - beta1) * g;
                vb[i] = beta2 * vb[i] + (1.0 - beta2) * g * g;
                const double mhat = mb[i] / bc1;
                const double vhat = vb[i] / bc2;
                t.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }
};

}  // namespace grn
