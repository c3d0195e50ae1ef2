// grn: command-line front end for the few-shot EEG decoding toolkit.
//
// Subcommands: generate, preprocess, train, eval, simulate, inspect.
// Exit codes: 0 ok, 2 I/O, 3 validation, 4 divergence, 64 usage.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "grn/grn.hpp"

namespace {

using nlohmann::json;

int exit_code_for(grn::ErrorKind k) {
    switch (k) {
        case grn::ErrorKind::Io:
        case grn::ErrorKind::Checksum:
        case grn::ErrorKind::Version:
        case grn::ErrorKind::Truncated:
            return 2;
        case grn::ErrorKind::Divergence:
            return 4;
        default:
            return 3;
    }
}

std::string out_dir() {
    if (const char* d = std::getenv("GRN_OUT_DIR")) return d;
    return ".";
}

std::string resolve_out(const std::string& path) {
    if (path.empty() || path.front() == '/' || path.rfind("./", 0) == 0) return path;
    return out_dir() + "/" + path;
}

// flags > config file > defaults; CLI11 config support handles the file layer
void add_config_file(CLI::App& app) {
    app.set_config("--config", "", "JSON/TOML config file (flags take precedence)");
    app.allow_config_extras(true);
}

json config_json(const grn::SynthConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["trials_per_class"] = c.trials_per_class;
    j["noise_amp"] = c.noise_amp;
    j["snr_db"] = c.snr_db;
    j["fs"] = c.fs;
    j["duration_s"] = c.duration_s;
    j["focus_sigma"] = c.focus_sigma;
    j["phase_jitter"] = c.phase_jitter;
    json cls = json::array();
    for (const auto& k : c.classes)
        cls.push_back({{"name", k.name},
                       {"subpart", k.subpart},
                       {"focus_row", k.focus_row},
                       {"focus_col", k.focus_col},
                       {"band_lo", k.band_lo},
                       {"band_hi", k.band_hi},
                       {"depth", k.depth}});
    j["classes"] = cls;
    return j;
}

json config_json(const grn::FitConfig& fc) {
    json j;
    j["n_shot"] = fc.n_shot;
    j["max_epochs"] = fc.max_epochs;
    j["loss_tol"] = fc.loss_tol;
    j["lr"] = fc.lr;
    j["seed"] = fc.seed;
    j["model"]["n_groups"] = fc.model.n_groups;
    j["model"]["n_classes"] = fc.model.n_classes;
    j["model"]["input_time"] = fc.model.input_time;
    return j;
}

void write_report(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) grn::fail(grn::ErrorKind::Io, "cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
}

int cmd_generate(const std::string& out_path, uint64_t seed, int trials, double depth, double snr,
                 double jitter, double sigma, double duration, bool grid, bool reps_only) {
    grn::SynthConfig cfg = grn::default_synth_config();
    cfg.seed = seed;
    cfg.trials_per_class = trials;
    cfg.snr_db = snr;
    cfg.phase_jitter = jitter;
    cfg.focus_sigma = sigma;
    cfg.duration_s = duration;
    if (reps_only) cfg.classes = grn::representative_classes();
    for (auto& c : cfg.classes) c.depth = depth;
    auto raw = grn::generate_session(cfg);
    const std::string path = resolve_out(out_path);
    if (grid) {
        auto ds = grn::preprocess_dataset(raw);
        ds.provenance += " | config " + config_json(cfg).dump();
        grn::save_grid_dataset(ds, path);
        std::cout << "wrote grid dataset: " << path << " (" << ds.trials.size() << " trials, "
                  << ds.n_classes << " classes)\n";
    } else {
        raw.provenance += " | config " + config_json(cfg).dump();
        grn::save_raw_dataset(raw, path);
        std::cout << "wrote raw dataset: " << path << " (" << raw.trials.size() << " trials)\n";
    }
    return 0;
}

int cmd_preprocess(const std::string& in_path, const std::string& out_path) {
    auto raw = grn::load_raw_dataset(in_path);
    auto ds = grn::preprocess_dataset(raw);
    grn::save_grid_dataset(ds, resolve_out(out_path));
    std::cout << "wrote grid dataset: " << resolve_out(out_path) << " (" << ds.trials.size()
              << " trials @ " << ds.fs << " Hz)\n";
    return 0;
}

int cmd_train(const std::string& data_path, const std::string& ckpt_path, grn::FitConfig fc,
              const std::string& report_path) {
    auto ds = grn::load_grid_dataset(data_path);
    fc.model.n_classes = ds.n_classes;
    auto m = grn::fit(ds, fc);
    grn::save_checkpoint(m, resolve_out(ckpt_path));
    json rep;
    rep["config"] = config_json(fc);
    rep["epochs_run"] = m.report.epochs_run;
    rep["converged"] = m.report.converged;
    rep["final_loss"] =
        m.report.epoch_losses.empty() ? json() : json(m.report.epoch_losses.back());
    rep["losses"] = m.report.epoch_losses;
    rep["support_indices"] = m.report.support.trial_indices;
    rep["wall_seconds"] = m.report.wall_seconds;
    if (!report_path.empty()) write_report(resolve_out(report_path), rep);
    std::cout << "trained " << m.report.epochs_run << " epochs, final loss "
              << (m.report.epoch_losses.empty() ? 0.0 : m.report.epoch_losses.back())
              << ", checkpoint: " << resolve_out(ckpt_path) << "\n";
    return 0;
}

int cmd_eval(const std::string& data_path, grn::FitConfig fc, int repeats, bool candidates,
             const std::string& report_path) {
    auto ds = grn::load_grid_dataset(data_path);
    fc.model.n_classes = ds.n_classes;
    auto pr = grn::run_protocol(ds, fc, repeats);
    std::cout << grn::aggregate_table({pr});
    json rep;
    rep["config"] = config_json(fc);
    rep["repeats"] = repeats;
    rep["mean_accuracy"] = pr.mean_accuracy;
    rep["std_accuracy"] = pr.std_accuracy;
    rep["best_accuracy"] = pr.best_accuracy;
    if (candidates) {
        grn::FitConfig best = fc;
        best.seed = pr.runs[static_cast<size_t>(pr.best_run)].seed;
        auto m = grn::fit(ds, best);
        auto crs = grn::evaluate_candidates(ds, m);
        json arr = json::array();
        for (const auto& cr : crs) {
            std::printf("candidate %d -> class %d: %.4f (%d trials)\n", cr.candidate_label,
                        cr.target_class, cr.accuracy, cr.n_trials);
            arr.push_back({{"label", cr.candidate_label},
                           {"target", cr.target_class},
                           {"accuracy", cr.accuracy}});
        }
        rep["candidates"] = arr;
        std::printf("candidate mean: %.4f\n", grn::mean_candidate_accuracy(crs));
    }
    if (!report_path.empty()) write_report(resolve_out(report_path), rep);
    return 0;
}

// Session script: {"tasks": [{"events": [{"type": "command", "trial": 12} |
// {"type": "blink"} | {"type": "nod"}]}]} with trial indices into a grid
// dataset of 5 s acquisitions.
int cmd_simulate(const std::string& data_path, const std::string& ckpt_path,
                 const std::string& script_path, const std::string& report_path) {
    auto ds = grn::load_grid_dataset(data_path);
    auto m = grn::load_checkpoint(ckpt_path);
    std::ifstream in(script_path);
    if (!in) grn::fail(grn::ErrorKind::Io, "cannot open " + script_path);
    json script;
    try {
        in >> script;
    } catch (const json::exception& e) {
        grn::fail(grn::ErrorKind::Io, script_path + ": bad script: " + e.what());
    }
    std::vector<grn::TaskScript> tasks;
    for (const auto& jt : script.at("tasks")) {
        grn::TaskScript t;
        for (const auto& je : jt.at("events")) {
            grn::SessionEvent ev;
            const std::string type = je.at("type").get<std::string>();
            if (type == "command") {
                ev.kind = grn::EventKind::Command;
                const size_t idx = je.at("trial").get<size_t>();
                if (idx >= ds.trials.size())
                    grn::fail(grn::ErrorKind::Parameter,
                              "script trial index out of range: " + std::to_string(idx));
                ev.acq.grid = ds.trials[idx].grid;
                ev.acq.fs = ds.fs;
                ev.acq.intent = ds.trials[idx].label;
            } else if (type == "blink") {
                ev.kind = grn::EventKind::BlinkVeto;
            } else if (type == "nod") {
                ev.kind = grn::EventKind::NodReset;
            } else {
                grn::fail(grn::ErrorKind::Parameter, "unknown event type '" + type + "'");
            }
            t.events.push_back(std::move(ev));
        }
        tasks.push_back(std::move(t));
    }
    auto stats = grn::run_session(tasks, grn::model_decoder(m));
    std::cout << grn::stats_report(stats);
    if (!report_path.empty()) {
        json rep;
        rep["success_rate"] = stats.success_rate;
        rep["mean_commands"] = stats.mean_commands;
        rep["std_commands"] = stats.std_commands;
        rep["mean_time_s"] = stats.mean_time_s;
        rep["std_time_s"] = stats.std_time_s;
        rep["command_accuracy"] = stats.command_accuracy;
        write_report(resolve_out(report_path), rep);
    }
    return 0;
}

int cmd_inspect(const std::string& ckpt_path) {
    auto m = grn::load_checkpoint(ckpt_path);
    const auto& c = m.params.cfg;
    std::printf("model geometry:\n");
    std::printf("  input            1 x %d x %d x %d\n", c.grid_h, c.grid_w, c.input_time);
    std::printf("  temporal conv    %d x %d x %d x %d\n", c.l1_filters(), c.grid_h, c.grid_w,
                c.t_after_l1());
    std::printf("  spatial conv     %d x 1 x 1 x %d\n", c.spatial_channels(), c.t_after_l1());
    std::printf("  embedding        %d x %d x %d\n", c.n_groups, c.group_channels(), c.emb_time());
    std::printf("  relation conv2   %d x %d\n", c.rel_channels(), c.rel2_time());
    std::printf("  GAP vector       %d\n", c.rel_channels());
    std::printf("prototypes: %zu\n", m.prototypes.size());
    // dominant-band census of the prototype time courses at the feature rate
    const double fs_feature = 250.0 * double(c.emb_time()) / double(c.input_time);
    std::vector<std::vector<double>> rows;
    for (const auto& p : m.prototypes)
        for (int r = 0; r < c.n_groups * c.group_channels(); ++r)
            rows.emplace_back(p.embedding.data.begin() + int64_t(r) * c.emb_time(),
                              p.embedding.data.begin() + int64_t(r + 1) * c.emb_time());
    std::printf("beta-band prototype rows: %.2f%%\n",
                100.0 * grn::beta_fraction(rows, fs_feature));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"few-shot EEG motor-imagery decoder"};
    app.require_subcommand(1);
    add_config_file(app);

    // generate
    auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
    std::string gen_out = "dataset.grn";
    uint64_t gen_seed = 1;
    int gen_trials = 50;
    double gen_depth = 0.8;
    double gen_snr = 6.0, gen_jitter = 1.0, gen_sigma = 0.9;
    bool gen_grid = false, gen_reps = false;
    gen->add_option("-o,--out", gen_out, "output path");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--trials", gen_trials, "trials per class");
    gen->add_option("--depth", gen_depth, "modulation depth (0 = class-indistinguishable)");
    gen->add_option("--snr", gen_snr, "rhythm-over-noise ratio in dB");
    gen->add_option("--phase-jitter", gen_jitter, "per-trial rhythm phase wander in [0,1]");
    gen->add_option("--focus-sigma", gen_sigma, "spatial falloff of the attenuation focus");
    double gen_duration = 3.0;
    gen->add_option("--duration", gen_duration, "trial length in seconds (5 for acquisitions)");
    gen->add_flag("--grid", gen_grid, "preprocess to grid epochs before writing");
    gen->add_flag("--representatives-only", gen_reps, "only the three trained classes");

    // preprocess
    auto* pre = app.add_subcommand("preprocess", "raw dataset -> grid dataset");
    std::string pre_in, pre_out = "grid.grn";
    pre->add_option("-i,--in", pre_in, "raw dataset path")->required();
    pre->add_option("-o,--out", pre_out, "output path");

    // shared fit options
    grn::FitConfig fc;
    auto add_fit_opts = [&fc](CLI::App* s) {
        s->add_option("--shots", fc.n_shot, "support trials per class");
        s->add_option("--epochs", fc.max_epochs, "training epoch cap");
        s->add_option("--lr", fc.lr, "optimizer learning rate");
        s->add_option("--loss-tol", fc.loss_tol, "early-stop loss threshold");
        s->add_option("--seed", fc.seed, "run seed");
    };

    // train
    auto* trn = app.add_subcommand("train", "fit on a support sample, write a checkpoint");
    std::string trn_data, trn_ckpt = "model.ckpt", trn_report;
    trn->add_option("-i,--in", trn_data, "grid dataset path")->required();
    trn->add_option("-o,--out", trn_ckpt, "checkpoint path");
    trn->add_option("--report", trn_report, "JSON training report path");
    add_fit_opts(trn);

    // eval
    auto* ev = app.add_subcommand("eval", "repeated few-shot evaluation");
    std::string ev_data, ev_report;
    int ev_repeats = 10;
    bool ev_cand = false;
    ev->add_option("-i,--in", ev_data, "grid dataset path")->required();
    ev->add_option("--repeats", ev_repeats, "number of repeats");
    ev->add_flag("--candidates", ev_cand, "also score untrained candidate classes");
    ev->add_option("--report", ev_report, "JSON report path");
    add_fit_opts(ev);

    // simulate
    auto* sim = app.add_subcommand("simulate", "replay a session script");
    std::string sim_data, sim_ckpt, sim_script, sim_report;
    sim->add_option("-i,--in", sim_data, "grid dataset of 5 s acquisitions")->required();
    sim->add_option("--model", sim_ckpt, "checkpoint path")->required();
    sim->add_option("--script", sim_script, "session script JSON")->required();
    sim->add_option("--report", sim_report, "JSON report path");

    // inspect
    auto* ins = app.add_subcommand("inspect", "summarize a checkpoint");
    std::string ins_ckpt;
    ins->add_option("ckpt", ins_ckpt, "checkpoint path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 64;
    }

    try {
        if (gen->parsed())
            return cmd_generate(gen_out, gen_seed, gen_trials, gen_depth, gen_snr, gen_jitter,
                                gen_sigma, gen_duration, gen_grid, gen_reps);
        if (pre->parsed()) return cmd_preprocess(pre_in, pre_out);
        if (trn->parsed()) return cmd_train(trn_data, trn_ckpt, fc, trn_report);
        if (ev->parsed()) return cmd_eval(ev_data, fc, ev_repeats, ev_cand, ev_report);
        if (sim->parsed()) return cmd_simulate(sim_data, sim_ckpt, sim_script, sim_report);
        if (ins->parsed()) return cmd_inspect(ins_ckpt);
    } catch (const grn::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 64;
}
