#pragma once

#include <array>
#include <string>
#include <unordered_map>
#include <vector>

#include "grn/dsp.hpp"
#include "grn/model.hpp"
#include "grn/tensor.hpp"

namespace grn {

// ---------------------------------------------------------------------------
// Montage: 10-20 sensorimotor grid. Rows front-to-back F/FC/C/CP/P, columns
// left-to-right [x3, x1, xz, x2, x4] (odd = left hemisphere, z = midline).
// ---------------------------------------------------------------------------

inline const std::array<std::array<std::string, 5>, 5>& grid_layout() {
    static const std::array<std::array<std::string, 5>, 5> layout = {{
        {"F3", "F1", "Fz", "F2", "F4"},
        {"FC3", "FC1", "FCz", "FC2", "FC4"},
        {"C3", "C1", "Cz", "C2", "C4"},
        {"CP3", "CP1", "CPz", "CP2", "CP4"},
        {"P3", "P1", "Pz", "P2", "P4"},
    }};
    return layout;
}

// Row-major (row*5 + col) indices into the record's channel list.
inline std::vector<int> select_and_grid(const std::vector<std::string>& channel_names) {
    std::unordered_map<std::string, int> pos;
    for (size_t i = 0; i < channel_names.size(); ++i) pos[channel_names[i]] = int(i);
    std::vector<int> idx;
    std::string missing;
    for (const auto& row : grid_layout())
        for (const auto& name : row) {
            auto it = pos.find(name);
            if (it == pos.end()) {
                if (!missing.empty()) missing += ", ";
                missing += name;
                idx.push_back(-1);
            } else {
                idx.push_back(it->second);
            }
        }
    if (!missing.empty())
        fail(ErrorKind::Protocol, "select_and_grid: channels missing from record: " + missing);
    return idx;
}

// The 60-channel acquisition montage the raw-data convention uses.
inline std::vector<std::string> standard_channel_names() {
    std::vector<std::string> n;
    auto range = [&](const std::string& base, int lo, int hi) {
        for (int i = lo; i <= hi; ++i) n.push_back(base + std::to_string(i));
    };
    range("Fp", 1, 2);
    range("AF", 5, 8);
    n.push_back("AFz");
    range("F", 1, 8);
    n.push_back("Fz");
    range("FT", 7, 8);
    range("FC", 1, 6);
    n.push_back("FCz");
    range("T", 7, 8);
    range("C", 1, 6);
    n.push_back("Cz");
    range("TP", 7, 8);
    range("CP", 1, 6);
    n.push_back("CPz");
    range("P", 1, 8);
    n.push_back("Pz");
    range("PO", 3, 4);
    range("PO", 7, 8);
    n.push_back("POz");
    range("O", 1, 2);
    n.push_back("Oz");
    return n;
}

// ---------------------------------------------------------------------------
// Raw records and the full per-trial pipeline:
// notch -> band-pass -> decimate -> channel grid.
// ---------------------------------------------------------------------------

struct RawRecord {
    double fs = 2500.0;
    std::vector<std::string> channel_names;
    Tensor samples;  // channels × time

    void validate() const {
        if (!(fs > 0.0)) fail(ErrorKind::Parameter, "RawRecord: fs must be positive");
        if (samples.ndim() != 2 || samples.dim(0) != int(channel_names.size()))
            fail(ErrorKind::Dimension, "RawRecord: samples must be channels × time");
    }
};

struct PreprocessConfig {
    double notch_hz = 60.0;
    double notch_q = 30.0;
    double band_lo = 0.5;
    double band_hi = 40.0;
    int band_order = 4;
    double target_fs = 250.0;
};

struct PreprocessFilters {
    BiquadChain notch, bandpass;
    int decim_factor = 10;
    double target_fs = 250.0;

    static PreprocessFilters design(double fs, const PreprocessConfig& cfg = {}) {
        PreprocessFilters f;
        f.notch = design_notch(cfg.notch_hz, cfg.notch_q, fs);
        f.bandpass = design_bandpass(cfg.band_lo, cfg.band_hi, fs, cfg.band_order);
        const double ratio = fs / cfg.target_fs;
        f.decim_factor = int(ratio + 0.5);
        if (std::abs(ratio - double(f.decim_factor)) > 1e-9)
            fail(ErrorKind::Parameter, "preprocess: fs must be an integer multiple of target rate");
        f.target_fs = cfg.target_fs;
        return f;
    }
};

// Filter + decimate + grid-select one raw trial into a 5×5×L tensor.
inline Tensor preprocess_to_grid(const RawRecord& rec, const PreprocessFilters& f) {
    rec.validate();
    const auto idx = select_and_grid(rec.channel_names);
    const int T = rec.samples.dim(1);
    const int L = (T + f.decim_factor - 1) / f.decim_factor;
    Tensor grid({5, 5, L});
    std::vector<double> chan(static_cast<size_t>(T));
    for (int cell = 0; cell < 25; ++cell) {
        const double* src = rec.samples.data.data() + int64_t(idx[size_t(cell)]) * T;
        chan.assign(src, src + T);
        chan = filtfilt(f.notch, chan);
        chan = filtfilt(f.bandpass, chan);
        const auto dec = decimate(chan, f.decim_factor);
        std::copy(dec.begin(), dec.end(), grid.data.begin() + int64_t(cell) * L);
    }
    return grid;
}

inline GridEpoch preprocess_trial(const RawRecord& rec, int label, const PreprocessFilters& f) {
    GridEpoch e;
    e.grid = preprocess_to_grid(rec, f);
    e.label = label;
    e.fs = f.target_fs;
    return e;
}

// ---------------------------------------------------------------------------
// Sliding windows: window_s-long slices at stride_s offsets (exact copies).
// ---------------------------------------------------------------------------

inline std::vector<Tensor> sliding_windows(const Tensor& grid, double fs, double window_s = 3.0,
                                           double stride_s = 0.5, int count = 5) {
    if (grid.ndim() != 3) fail(ErrorKind::Dimension, "sliding_windows: expected H×W×T grid");
    const int T = grid.dim(2);
    const int win = int(window_s * fs + 0.5);
    const int stride = int(stride_s * fs + 0.5);
    const int need = win + (count - 1) * stride;
    if (T < need)
        fail(ErrorKind::Length, "sliding_windows: need " + std::to_string(need) + " samples (" +
                                    std::to_string(double(need) / fs) + " s), got " +
                                    std::to_string(T));
    const int cells = grid.dim(0) * grid.dim(1);
    std::vector<Tensor> out;
    for (int w = 0; w < count; ++w) {
        Tensor slice({grid.dim(0), grid.dim(1), win});
        const int off = w * stride;
        for (int c = 0; c < cells; ++c)
            std::copy(grid.data.begin() + int64_t(c) * T + off,
                      grid.data.begin() + int64_t(c) * T + off + win,
                      slice.data.begin() + int64_t(c) * win);
        out.push_back(std::move(slice));
    }
    return out;
}

}  // namespace grn
