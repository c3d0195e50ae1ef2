#pragma once

#include <chrono>
#include <numeric>
#include <string>
#include <vector>

#include "grn/adam.hpp"
#include "grn/data.hpp"
#include "grn/model.hpp"
#include "grn/rng.hpp"

namespace grn {

// ---------------------------------------------------------------------------
// Episodic training on a fixed support set: every epoch forms all ordered
// support pairs, including self-pairs, sums the squared relation-score error
// against the same-class indicator, and takes a single optimizer step.
// ---------------------------------------------------------------------------

struct SupportSet {
    std::vector<int> trial_indices;  // into the dataset, grouped by class ascending
    std::vector<int> labels;         // label per support trial

    int size() const { return int(trial_indices.size()); }
};

// n_shot trials per class without replacement, deterministic in rng. Indices
// come out ascending within every class, so n_shot = class size reproduces the
// dataset order exactly.
inline SupportSet sample_support(const GridDataset& ds, int n_shot, SplitMix64& rng) {
    if (n_shot < 1) fail(ErrorKind::Parameter, "sample_support: n_shot must be >= 1");
    SupportSet s;
    for (int k = 0; k < ds.n_classes; ++k) {
        const auto pool = ds.indices_of(k);
        if (int(pool.size()) < n_shot)
            fail(ErrorKind::Parameter, "sample_support: class " + std::to_string(k) + " has " +
                                           std::to_string(pool.size()) + " trials, need " +
                                           std::to_string(n_shot));
        auto pos = sample_without_replacement(int(pool.size()), n_shot, rng);
        std::sort(pos.begin(), pos.end());
        for (int p : pos) {
            s.trial_indices.push_back(pool[size_t(p)]);
            s.labels.push_back(k);
        }
    }
    return s;
}

struct FitConfig {
    GrnConfig model;
    int n_shot = 5;
    int max_epochs = 60;
    double loss_tol = 1e-3;
    double lr = 1e-3;
    uint64_t seed = 1;
};

struct TrainReport {
    std::vector<double> epoch_losses;  // mean pair loss per completed epoch
    int epochs_run = 0;
    bool converged = false;  // stopped on loss_tol rather than the epoch cap
    uint64_t seed = 0;
    double wall_seconds = 0.0;
    SupportSet support;
};

struct FittedModel {
    GrnParams params;
    std::vector<Prototype> prototypes;
    TrainReport report;

    explicit FittedModel(const GrnConfig& c = GrnConfig()) : params(c) {}
};

namespace detail {

// Gathers support trials into one contiguous N × input buffer.
inline std::vector<double> gather_support(const GridDataset& ds, const SupportSet& s,
                                          const GrnConfig& c) {
    const int64_t in_sz = int64_t(c.grid_h) * c.grid_w * c.input_time;
    std::vector<double> x(static_cast<size_t>(s.size()) * in_sz);
    for (int n = 0; n < s.size(); ++n) {
        const Tensor& g = ds.trials[size_t(s.trial_indices[size_t(n)])].grid;
        require_shape(g, {c.grid_h, c.grid_w, c.input_time}, "support trial");
        std::copy(g.data.begin(), g.data.end(), x.begin() + int64_t(n) * in_sz);
    }
    return x;
}

}  // namespace detail

// One episode: forward/backward over all ordered pairs, one Adam step.
// Returns the mean pair loss before the step.
inline double train_epoch(const double* x, const SupportSet& s, GrnParams& P, AdamState& opt) {
    const GrnConfig& c = P.cfg;
    const int N = s.size();
    const int64_t es = c.emb_size();

    P.zero_grad();
    EncodeCache ec;
    std::vector<double> emb(static_cast<size_t>(N) * es);
    encode_batch(x, N, P, true, &ec, emb.data());

    std::vector<double> gemb(emb.size(), 0.0);
    std::vector<int> qi(static_cast<size_t>(N)), pj(static_cast<size_t>(N));
    std::vector<double> r(static_cast<size_t>(N)), gr(static_cast<size_t>(N));
    double loss_sum = 0.0;
    // one relation batch per query row: pairs (i, 0..N-1)
    for (int i = 0; i < N; ++i) {
        for (int j = 0; j < N; ++j) {
            qi[size_t(j)] = i;
            pj[size_t(j)] = j;
        }
        RelationCache rc;
        relation_forward_batch(emb.data(), qi.data(), pj.data(), N, P, true, &rc, r.data());
        for (int j = 0; j < N; ++j) {
            const bool same = s.labels[size_t(i)] == s.labels[size_t(j)];
            loss_sum += mse_pair_loss(r[size_t(j)], same, &gr[size_t(j)]);
        }
        relation_backward_batch(gr.data(), qi.data(), pj.data(), rc, P, gemb.data());
    }
    encode_backward(gemb.data(), x, ec, P);

    auto params = P.learnable();
    opt.update(params);
    return loss_sum / (double(N) * N);
}

// One statistics-only pass so eval-mode normalization works without any
// optimizer step (max_epochs = 0).
inline void calibrate_bn_stats(const double* x, const SupportSet& s, GrnParams& P) {
    const int N = s.size();
    std::vector<double> emb(static_cast<size_t>(N) * P.cfg.emb_size());
    encode_batch(x, N, P, true, nullptr, emb.data());
    std::vector<int> qi(static_cast<size_t>(N)), pj(static_cast<size_t>(N));
    std::vector<double> r(static_cast<size_t>(N));
    for (int j = 0; j < N; ++j) {
        qi[size_t(j)] = 0;
        pj[size_t(j)] = j;
    }
    relation_forward_batch(emb.data(), qi.data(), pj.data(), N, P, true, nullptr, r.data());
}

inline FittedModel fit(const GridDataset& ds, const FitConfig& fc) {
    if (fc.max_epochs < 0) fail(ErrorKind::Parameter, "fit: max_epochs must be >= 0");
    const auto t0 = std::chrono::steady_clock::now();

    FittedModel m(fc.model);
    SplitMix64 root(fc.seed);
    const uint64_t weight_seed = root.next();
    SplitMix64 support_rng(root.next());
    m.params.init_weights(weight_seed);
    m.report.seed = fc.seed;
    m.report.support = sample_support(ds, fc.n_shot, support_rng);
    const auto& s = m.report.support;

    const auto x = detail::gather_support(ds, s, fc.model);
    AdamState opt;
    opt.lr = fc.lr;
    {
        auto params = m.params.learnable();
        opt.init(params);
    }

    double initial_loss = 0.0;
    int bad_streak = 0;
    for (int e = 0; e < fc.max_epochs; ++e) {
        const double loss = train_epoch(x.data(), s, m.params, opt);
        if (!std::isfinite(loss))
            fail(ErrorKind::Divergence,
                 "fit: non-finite loss at epoch " + std::to_string(e) + " (seed " +
                     std::to_string(fc.seed) + ", " + std::to_string(s.size()) + " support trials)");
        m.report.epoch_losses.push_back(loss);
        m.report.epochs_run = e + 1;
        if (e == 0) initial_loss = loss;
        bad_streak = (e > 0 && loss > 10.0 * initial_loss) ? bad_streak + 1 : 0;
        if (bad_streak >= 20)
            fail(ErrorKind::Divergence,
                 "fit: loss exceeded 10x the initial value for 20 consecutive epochs (epoch " +
                     std::to_string(e) + ", loss " + std::to_string(loss) + ")");
        if (loss < fc.loss_tol) {
            m.report.converged = true;
            break;
        }
    }
    if (fc.max_epochs == 0) calibrate_bn_stats(x.data(), s, m.params);

    // eval-mode support embeddings -> class prototypes
    std::vector<double> emb(static_cast<size_t>(s.size()) * fc.model.emb_size());
    encode_batch(x.data(), s.size(), m.params, false, nullptr, emb.data());
    m.prototypes = prototypes_from_embeddings(emb.data(), s.labels, fc.model);

    m.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return m;
}

}  // namespace grn
