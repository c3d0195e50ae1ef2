#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "grn/data.hpp"
#include "grn/train.hpp"

using namespace grn;

namespace {

// tiny grid dataset with class-dependent structure, reduced geometry
GridDataset toy_dataset(const GrnConfig& c, int n_classes, int per_class, uint64_t seed) {
    GridDataset ds;
    ds.n_classes = n_classes;
    SplitMix64 rng(seed);
    for (int k = 0; k < n_classes; ++k) {
        ds.class_names.push_back("class" + std::to_string(k));
        for (int t = 0; t < per_class; ++t) {
            GridEpoch e;
            e.label = k;
            e.grid = Tensor({c.grid_h, c.grid_w, c.input_time});
            for (int64_t i = 0; i < e.grid.size(); ++i) {
                const double phase = 0.3 * double(k);
                e.grid.data[static_cast<size_t>(i)] =
                    std::sin(0.2 * double(i % c.input_time) + phase) + 0.3 * rng.gaussian();
            }
            ds.trials.push_back(std::move(e));
        }
    }
    return ds;
}

}  // namespace

TEST_CASE("support sampling") {
    GrnConfig c = GrnConfig::reduced();
    const auto ds = toy_dataset(c, 3, 10, 1);

    SUBCASE("n per class, ascending within class, deterministic") {
        SplitMix64 rng(4);
        const auto s = sample_support(ds, 3, rng);
        CHECK(s.size() == 9);
        for (int k = 0; k < 3; ++k) {
            for (int i = 0; i < 3; ++i) CHECK(s.labels[static_cast<size_t>(3 * k + i)] == k);
            CHECK(s.trial_indices[static_cast<size_t>(3 * k)] < s.trial_indices[static_cast<size_t>(3 * k + 1)]);
            CHECK(s.trial_indices[static_cast<size_t>(3 * k + 1)] < s.trial_indices[static_cast<size_t>(3 * k + 2)]);
        }
        SplitMix64 rng2(4);
        const auto s2 = sample_support(ds, 3, rng2);
        CHECK(s2.trial_indices == s.trial_indices);
    }

    SUBCASE("n = class size gives the whole class in dataset order") {
        SplitMix64 rng(4);
        const auto s = sample_support(ds, 10, rng);
        for (int i = 0; i < 30; ++i) CHECK(s.trial_indices[static_cast<size_t>(i)] == i);
    }

    SUBCASE("too large n is an error") {
        SplitMix64 rng(4);
        CHECK_THROWS_AS((void)sample_support(ds, 11, rng), Error);
    }
}

TEST_CASE("pair accounting: (nK)^2 ordered pairs per epoch") {
    // instrumented count through the loss value: with K classes and n shots,
    // same-class pairs = K n^2; with untrained weights near r = 0.5 every pair
    // contributes ~0.25, so the mean sits near 0.25 regardless of counts.
    // The structural claim is checked directly on the support set instead.
    GrnConfig c = GrnConfig::reduced();
    const auto ds = toy_dataset(c, 3, 8, 2);
    SplitMix64 rng(5);
    const auto s3 = sample_support(ds, 1, rng);
    CHECK(s3.size() * s3.size() == 9);
    const auto s15 = sample_support(ds, 5, rng);
    CHECK(s15.size() * s15.size() == 225);
}

TEST_CASE("fit is bit-deterministic in the seed") {
    GrnConfig c = GrnConfig::reduced();
    const auto ds = toy_dataset(c, 3, 6, 3);
    FitConfig fc;
    fc.model = c;
    fc.n_shot = 2;
    fc.max_epochs = 3;
    fc.seed = 99;

    const auto a = fit(ds, fc);
    const auto b = fit(ds, fc);
    CHECK(a.report.epoch_losses == b.report.epoch_losses);
    CHECK(a.report.support.trial_indices == b.report.support.trial_indices);
    for (size_t k = 0; k < a.prototypes.size(); ++k)
        CHECK(a.prototypes[k].embedding.data == b.prototypes[k].embedding.data);
    CHECK(a.params.conv1_w.data == b.params.conv1_w.data);

    FitConfig other = fc;
    other.seed = 100;
    const auto d = fit(ds, other);
    CHECK(d.params.conv1_w.data != a.params.conv1_w.data);
}

TEST_CASE("training reduces the pair loss on a learnable toy problem") {
    GrnConfig c = GrnConfig::reduced();
    const auto ds = toy_dataset(c, 3, 6, 7);
    FitConfig fc;
    fc.model = c;
    fc.n_shot = 3;
    fc.max_epochs = 30;
    fc.seed = 1;
    const auto m = fit(ds, fc);
    REQUIRE(m.report.epochs_run >= 2);
    const auto& l = m.report.epoch_losses;
    CHECK(l.back() < l.front());
    for (double v : l) CHECK(std::isfinite(v));
}

TEST_CASE("max_epochs = 0 still yields a usable model") {
    GrnConfig c = GrnConfig::reduced();
    const auto ds = toy_dataset(c, 3, 4, 8);
    FitConfig fc;
    fc.model = c;
    fc.n_shot = 2;
    fc.max_epochs = 0;
    const auto m = fit(ds, fc);
    CHECK(m.report.epochs_run == 0);
    REQUIRE(m.prototypes.size() == 3);
    // prediction works because statistics were calibrated without training
    const auto pred = predict(ds.trials[0], m.prototypes, const_cast<GrnParams&>(m.params));
    CHECK(pred.sigma.size() == 3);
    CHECK(all_finite(pred.r));
}

TEST_CASE("relation backward is linear in the output cotangent") {
    GrnConfig c = GrnConfig::reduced();
    GrnParams P(c);
    P.init_weights(17);
    SplitMix64 rng(18);
    const int N = 4;
    std::vector<double> emb(static_cast<size_t>(2) * c.emb_size());
    for (auto& v : emb) v = rng.gaussian();
    const std::vector<int> qi{0, 0, 1, 1}, pj{0, 1, 0, 1};

    auto backward_with = [&](const std::vector<double>& gr) {
        GrnParams Q = P;
        Q.zero_grad();
        RelationCache rc;
        std::vector<double> r(static_cast<size_t>(N));
        relation_forward_batch(emb.data(), qi.data(), pj.data(), N, Q, true, &rc, r.data());
        std::vector<double> gemb(emb.size(), 0.0);
        relation_backward_batch(gr.data(), qi.data(), pj.data(), rc, Q, gemb.data());
        // collect one representative gradient block plus the input gradient
        std::vector<double> flat = gemb;
        flat.insert(flat.end(), Q.rconv1_w.grad.begin(), Q.rconv1_w.grad.end());
        flat.insert(flat.end(), Q.fc1_w.grad.begin(), Q.fc1_w.grad.end());
        return flat;
    };

    std::vector<double> g1(static_cast<size_t>(N)), g2(static_cast<size_t>(N));
    for (auto& v : g1) v = rng.gaussian();
    for (auto& v : g2) v = rng.gaussian();
    std::vector<double> gsum(static_cast<size_t>(N));
    for (int i = 0; i < N; ++i) gsum[static_cast<size_t>(i)] = g1[static_cast<size_t>(i)] + 2.5 * g2[static_cast<size_t>(i)];

    const auto b1 = backward_with(g1);
    const auto b2 = backward_with(g2);
    const auto bs = backward_with(gsum);
    double worst = 0;
    for (size_t i = 0; i < bs.size(); ++i) {
        const double want = b1[i] + 2.5 * b2[i];
        worst = std::max(worst, std::abs(bs[i] - want));
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("divergence reporting") {
    GrnConfig c = GrnConfig::reduced();
    const auto ds = toy_dataset(c, 3, 4, 9);
    FitConfig fc;
    fc.model = c;
    fc.n_shot = 2;
    fc.max_epochs = 60;
    fc.lr = 1e6;  // absurd step size
    try {
        (void)fit(ds, fc);
        // a huge learning rate may also just saturate the sigmoid; only a
        // thrown error must carry the divergence kind
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Divergence);
    }
}
