#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "grn/train.hpp"

namespace grn {

// ---------------------------------------------------------------------------
// Few-shot evaluation: repeated fits with fresh seeds, accuracy on the trials
// the support sample left out, population statistics across repeats.
// ---------------------------------------------------------------------------

struct RepeatResult {
    uint64_t seed = 0;
    double accuracy = 0.0;
    int n_test = 0;
    int n_correct = 0;
    std::vector<int> support_indices;
};

struct ProtocolResult {
    int n_shot = 0;
    int repeats = 0;
    std::vector<RepeatResult> runs;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;  // population (divide by N)
    int best_run = 0;
    double best_accuracy = 0.0;
};

inline double accuracy_on(const GridDataset& ds, const std::vector<int>& test_indices,
                          const FittedModel& m) {
    if (test_indices.empty()) fail(ErrorKind::Parameter, "accuracy_on: empty test set");
    GrnParams& P = const_cast<GrnParams&>(m.params);
    int correct = 0;
    for (int idx : test_indices) {
        const auto& t = ds.trials[size_t(idx)];
        if (predict(t, m.prototypes, P).class_id == t.label) ++correct;
    }
    return double(correct) / double(test_indices.size());
}

// Test set = every trial of the evaluated classes that is not in the support.
inline std::vector<int> held_out_indices(const GridDataset& ds, const SupportSet& s) {
    std::vector<bool> in_support(ds.trials.size(), false);
    for (int idx : s.trial_indices) in_support[size_t(idx)] = true;
    std::vector<int> test;
    for (size_t i = 0; i < ds.trials.size(); ++i)
        if (!in_support[i] && ds.trials[i].label < ds.n_classes) test.push_back(int(i));
    return test;
}

inline ProtocolResult run_protocol(const GridDataset& ds, const FitConfig& base, int repeats = 10) {
    if (repeats < 1) fail(ErrorKind::Parameter, "run_protocol: repeats must be >= 1");
    ProtocolResult pr;
    pr.n_shot = base.n_shot;
    pr.repeats = repeats;
    SplitMix64 seeder(base.seed);
    for (int rep = 0; rep < repeats; ++rep) {
        FitConfig fc = base;
        fc.seed = seeder.next();
        const FittedModel m = fit(ds, fc);
        RepeatResult rr;
        rr.seed = fc.seed;
        rr.support_indices = m.report.support.trial_indices;
        const auto test = held_out_indices(ds, m.report.support);
        rr.n_test = int(test.size());
        rr.accuracy = accuracy_on(ds, test, m);
        rr.n_correct = int(std::lround(rr.accuracy * rr.n_test));
        pr.runs.push_back(std::move(rr));
    }
    double sum = 0.0, sq = 0.0;
    for (int rep = 0; rep < repeats; ++rep) {
        const double a = pr.runs[size_t(rep)].accuracy;
        sum += a;
        sq += a * a;
        if (a > pr.best_accuracy) {
            pr.best_accuracy = a;
            pr.best_run = rep;
        }
    }
    pr.mean_accuracy = sum / repeats;
    const double var = sq / repeats - pr.mean_accuracy * pr.mean_accuracy;
    pr.std_accuracy = std::sqrt(var > 0.0 ? var : 0.0);
    return pr;
}

// ---------------------------------------------------------------------------
// Candidate projection: unseen movement classes scored against the three
// representative prototypes through a fixed sub-part taxonomy.
// ---------------------------------------------------------------------------

struct ClassTaxonomy {
    // taxonomy[candidate_label - first_candidate] = representative class id
    int first_candidate = 3;
    std::vector<int> mapping = {0, 0, 0, 0, 0, 1, 2, 2};

    int project(int candidate_label) const {
        const int i = candidate_label - first_candidate;
        if (i < 0 || i >= int(mapping.size()))
            fail(ErrorKind::Taxonomy,
                 "taxonomy: label " + std::to_string(candidate_label) + " is not a candidate");
        return mapping[size_t(i)];
    }
};

struct CandidateResult {
    int candidate_label = 0;
    int target_class = 0;
    int n_trials = 0;
    double accuracy = 0.0;  // fraction decoded as the taxonomy target
};

inline std::vector<CandidateResult> evaluate_candidates(const GridDataset& ds,
                                                        const FittedModel& m,
                                                        const ClassTaxonomy& tax = {}) {
    GrnParams& P = const_cast<GrnParams&>(m.params);
    std::vector<CandidateResult> out;
    for (int label = tax.first_candidate; label < tax.first_candidate + int(tax.mapping.size());
         ++label) {
        CandidateResult cr;
        cr.candidate_label = label;
        cr.target_class = tax.project(label);
        int correct = 0;
        for (const auto& t : ds.trials) {
            if (t.label != label) continue;
            ++cr.n_trials;
            if (predict(t, m.prototypes, P).class_id == cr.target_class) ++correct;
        }
        if (cr.n_trials == 0)
            fail(ErrorKind::Taxonomy,
                 "evaluate_candidates: no trials with label " + std::to_string(label));
        cr.accuracy = double(correct) / cr.n_trials;
        out.push_back(cr);
    }
    return out;
}

inline double mean_candidate_accuracy(const std::vector<CandidateResult>& rs) {
    double sum = 0.0;
    for (const auto& r : rs) sum += r.accuracy;
    return rs.empty() ? 0.0 : sum / double(rs.size());
}

// One text table row per shot count: mean ± std over repeats.
inline std::string aggregate_table(const std::vector<ProtocolResult>& rows) {
    std::string out = "shots  mean_acc  std_acc  best_acc  repeats\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%5d  %8.4f  %7.4f  %8.4f  %7d\n", r.n_shot,
                      r.mean_accuracy, r.std_accuracy, r.best_accuracy, r.repeats);
        out += buf;
    }
    return out;
}

// Eval-mode embeddings as CSV: label followed by the flat embedding vector.
inline void export_embeddings_csv(const GridDataset& ds, const std::vector<int>& indices,
                                  const FittedModel& m, const std::string& path) {
    GrnParams& P = const_cast<GrnParams&>(m.params);
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open " + path + " for writing");
    out << "label";
    for (int64_t i = 0; i < P.cfg.emb_size(); ++i) out << ",e" << i;
    out << "\n";
    for (int idx : indices) {
        const auto& t = ds.trials[size_t(idx)];
        const Tensor e = encode(t, P, false);
        out << t.label;
        char buf[32];
        for (double v : e.data) {
            std::snprintf(buf, sizeof buf, ",%.9g", v);
            out << buf;
        }
        out << "\n";
    }
    if (!out) fail(ErrorKind::Io, "short write to " + path);
}

}  // namespace grn
