#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>

#include "grn/eval.hpp"

using namespace grn;

namespace {

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
            for (int64_t i = 0; i < e.grid.size(); ++i)
                e.grid.data[static_cast<size_t>(i)] =
                    std::sin(0.2 * double(i % c.input_time) + 0.3 * k) + 0.3 * rng.gaussian();
            ds.trials.push_back(std::move(e));
        }
    }
    return ds;
}

}  // namespace

TEST_CASE("population statistics over repeats") {
    // injected accuracies {0.4, 0.6} -> avg 0.5, population std 0.1
    ProtocolResult pr;
    pr.repeats = 2;
    pr.runs.resize(2);
    pr.runs[0].accuracy = 0.4;
    pr.runs[1].accuracy = 0.6;
    double sum = 0, sq = 0;
    for (const auto& r : pr.runs) {
        sum += r.accuracy;
        sq += r.accuracy * r.accuracy;
    }
    const double mean = sum / 2.0;
    const double stdev = std::sqrt(sq / 2.0 - mean * mean);
    CHECK(mean == doctest::Approx(0.5));
    CHECK(stdev == doctest::Approx(0.1));
}

TEST_CASE("protocol runs keep support and test disjoint") {
    GrnConfig c = GrnConfig::reduced();
    const auto ds = toy_dataset(c, 3, 5, 1);
    FitConfig fc;
    fc.model = c;
    fc.n_shot = 2;
    fc.max_epochs = 2;
    fc.seed = 3;
    const auto pr = run_protocol(ds, fc, 3);
    REQUIRE(pr.runs.size() == 3);
    for (const auto& run : pr.runs) {
        CHECK(run.n_test == 9);  // 15 trials - 6 support
        std::vector<bool> support(ds.trials.size(), false);
        for (int i : run.support_indices) support[static_cast<size_t>(i)] = true;
        // accuracy was computed over exactly the complement
        CHECK(run.support_indices.size() == 6);
    }
    // different repeats draw different seeds
    CHECK(pr.runs[0].seed != pr.runs[1].seed);
    CHECK(pr.mean_accuracy >= 0.0);
    CHECK(pr.mean_accuracy <= 1.0);
    CHECK(pr.best_accuracy >= pr.mean_accuracy);
    CHECK(pr.runs[static_cast<size_t>(pr.best_run)].accuracy == pr.best_accuracy);
}

TEST_CASE("protocol statistics match a direct recomputation") {
    GrnConfig c = GrnConfig::reduced();
    const auto ds = toy_dataset(c, 3, 4, 2);
    FitConfig fc;
    fc.model = c;
    fc.n_shot = 1;
    fc.max_epochs = 1;
    fc.seed = 7;
    const auto pr = run_protocol(ds, fc, 4);
    double sum = 0, sq = 0;
    for (const auto& r : pr.runs) {
        sum += r.accuracy;
        sq += r.accuracy * r.accuracy;
    }
    CHECK(pr.mean_accuracy == doctest::Approx(sum / 4.0).epsilon(1e-12));
    const double var = sq / 4.0 - (sum / 4.0) * (sum / 4.0);
    CHECK(pr.std_accuracy == doctest::Approx(std::sqrt(var > 0 ? var : 0)).epsilon(1e-9));
}

TEST_CASE("taxonomy projection") {
    ClassTaxonomy tax;
    CHECK(tax.project(3) == 0);
    CHECK(tax.project(4) == 0);
    CHECK(tax.project(5) == 0);
    CHECK(tax.project(6) == 0);
    CHECK(tax.project(7) == 0);
    CHECK(tax.project(8) == 1);
    CHECK(tax.project(9) == 2);
    CHECK(tax.project(10) == 2);
    CHECK_THROWS_AS((void)tax.project(2), Error);
    CHECK_THROWS_AS((void)tax.project(11), Error);
}

TEST_CASE("candidate evaluation scores only candidate labels") {
    GrnConfig c = GrnConfig::reduced();
    auto ds = toy_dataset(c, 3, 4, 3);
    // add candidate trials for labels 3..10 that mimic their target class
    ClassTaxonomy tax;
    SplitMix64 rng(4);
    for (int label = 3; label <= 10; ++label) {
        for (int t = 0; t < 2; ++t) {
            GridEpoch e;
            e.label = label;
            e.grid = Tensor({c.grid_h, c.grid_w, c.input_time});
            for (int64_t i = 0; i < e.grid.size(); ++i)
                e.grid.data[static_cast<size_t>(i)] =
                    std::sin(0.2 * double(i % c.input_time) + 0.3 * tax.project(label)) +
                    0.3 * rng.gaussian();
            ds.trials.push_back(std::move(e));
        }
    }
    FitConfig fc;
    fc.model = c;
    fc.n_shot = 3;
    fc.max_epochs = 10;
    fc.seed = 5;
    const auto m = fit(ds, fc);
    const auto crs = evaluate_candidates(ds, m, tax);
    REQUIRE(crs.size() == 8);
    for (const auto& cr : crs) {
        CHECK(cr.n_trials == 2);
        CHECK(cr.target_class == tax.project(cr.candidate_label));
        CHECK(cr.accuracy >= 0.0);
        CHECK(cr.accuracy <= 1.0);
    }
    const double mean = mean_candidate_accuracy(crs);
    CHECK(mean >= 0.0);
    CHECK(mean <= 1.0);
}

TEST_CASE("held-out indices exclude support and non-representative labels") {
    GrnConfig c = GrnConfig::reduced();
    auto ds = toy_dataset(c, 3, 3, 6);
    // one candidate trial that must never appear in a test set
    GridEpoch cand;
    cand.label = 5;
    cand.grid = Tensor({c.grid_h, c.grid_w, c.input_time});
    ds.trials.push_back(std::move(cand));

    SupportSet s;
    s.trial_indices = {0, 3, 6};
    s.labels = {0, 1, 2};
    const auto test = held_out_indices(ds, s);
    CHECK(test.size() == 6);
    for (int i : test) {
        CHECK(ds.trials[static_cast<size_t>(i)].label < 3);
        CHECK(i != 0);
        CHECK(i != 3);
        CHECK(i != 6);
    }
}

TEST_CASE("aggregate table formatting") {
    ProtocolResult r;
    r.n_shot = 5;
    r.repeats = 10;
    r.mean_accuracy = 0.85;
    r.std_accuracy = 0.05;
    r.best_accuracy = 0.9;
    const auto table = aggregate_table({r});
    CHECK(table.find("shots") != std::string::npos);
    CHECK(table.find("0.8500") != std::string::npos);
    CHECK(table.find("0.9000") != std::string::npos);
}

TEST_CASE("embedding export writes one row per trial") {
    GrnConfig c = GrnConfig::reduced();
    const auto ds = toy_dataset(c, 3, 2, 8);
    FitConfig fc;
    fc.model = c;
    fc.n_shot = 1;
    fc.max_epochs = 0;
    const auto m = fit(ds, fc);
    const std::string path = "emb.tmp.csv";
    export_embeddings_csv(ds, {0, 1, 2}, m, path);
    std::ifstream in(path);
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 4);  // header + 3
    std::remove(path.c_str());
}
