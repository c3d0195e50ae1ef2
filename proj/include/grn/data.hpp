#pragma once

#include <cmath>
#include <complex>
#include <cstdio>
#include <string>
#include <vector>

#include "grn/fft.hpp"
#include "grn/preprocess.hpp"
#include "grn/rng.hpp"
#include "grn/tensor.hpp"

namespace grn {

// ---------------------------------------------------------------------------
// Synthetic motor-imagery sessions. Every trial carries 1/f background noise
// plus band-limited rhythms common to all classes; a trial's class attenuates
// its band (ERD-like) around a focal grid location, so modulation depth 0
// makes classes statistically indistinguishable.
// ---------------------------------------------------------------------------

struct ClassSpec {
    std::string name;
    int subpart = 0;           // 0 upper-arm, 1 forearm, 2 hand
    double focus_row = 2.0;    // grid coordinates (row, col) of the ERD focus
    double focus_col = 2.0;
    double band_lo = 8.0;      // rhythm band in Hz (mu 8-12, beta 12-30)
    double band_hi = 12.0;
    double depth = 0.8;        // modulation depth in [0, 1]
};

struct SynthConfig {
    uint64_t seed = 1;
    std::vector<ClassSpec> classes;
    double noise_amp = 1.0;    // 1/f background scale
    double snr_db = 6.0;       // rhythm RMS over noise scale, in dB
    double fs = 2500.0;
    double duration_s = 3.0;
    int trials_per_class = 50;
    double focus_sigma = 0.9;   // spatial falloff of the attenuation, in grid cells
    double phase_jitter = 1.0;  // fraction of a full cycle the rhythm phase may wander per trial

    void validate() const {
        if (classes.empty()) fail(ErrorKind::Parameter, "SynthConfig: no classes");
        if (trials_per_class < 1) fail(ErrorKind::Parameter, "SynthConfig: trials_per_class >= 1");
        for (const auto& c : classes)
            if (c.depth < 0.0 || c.depth > 1.0)
                fail(ErrorKind::Parameter, "SynthConfig: modulation depth must lie in [0,1]");
        if (phase_jitter < 0.0 || phase_jitter > 1.0)
            fail(ErrorKind::Parameter, "SynthConfig: phase_jitter must lie in [0,1]");
    }
};

// The three representative classes plus eight candidates mapped onto the same
// sub-parts (shifted focus / band within the sub-part's generator family).
inline std::vector<ClassSpec> representative_classes() {
    return {
        {"forward-reach", 0, 1.0, 2.0, 8.0, 12.0, 0.8},
        {"left-twist", 1, 2.0, 0.5, 18.0, 24.0, 0.8},
        {"cylindrical-grasp", 2, 3.0, 3.5, 8.0, 12.0, 0.8},
    };
}

inline std::vector<ClassSpec> candidate_classes() {
    return {
        {"reach-up", 0, 0.5, 2.0, 8.0, 12.0, 0.8},
        {"reach-down", 0, 1.5, 2.0, 8.0, 12.0, 0.8},
        {"reach-left", 0, 1.0, 1.0, 8.0, 12.0, 0.8},
        {"reach-right", 0, 1.0, 3.0, 8.0, 12.0, 0.8},
        {"reach-back", 0, 0.5, 1.5, 8.0, 12.0, 0.8},
        {"right-twist", 1, 2.0, 1.0, 18.0, 24.0, 0.8},
        {"lateral-grasp", 2, 3.5, 3.0, 8.0, 12.0, 0.8},
        {"spherical-grasp", 2, 3.0, 4.0, 8.0, 12.0, 0.8},
    };
}

inline SynthConfig default_synth_config() {
    SynthConfig c;
    c.classes = representative_classes();
    auto cand = candidate_classes();
    c.classes.insert(c.classes.end(), cand.begin(), cand.end());
    return c;
}

struct RawTrial {
    int label = 0;
    Tensor samples;  // channels × time
};

struct RawDataset {
    double fs = 2500.0;
    int n_decodable = 0;  // leading classes usable as direct intents; the rest are candidates
    std::vector<std::string> channel_names;
    std::vector<std::string> class_names;
    std::vector<RawTrial> trials;
    std::string provenance;
};

namespace detail {

// grid position of a channel name, or (-1,-1) when off the 5×5 grid
inline std::pair<int, int> grid_position(const std::string& name) {
    const auto& layout = grid_layout();
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 5; ++c)
            if (layout[size_t(r)][size_t(c)] == name) return {r, c};
    return {-1, -1};
}

// 1/f-amplitude background noise via a spectrally shaped random spectrum
inline std::vector<double> pink_noise(int n, double amp, SplitMix64& rng) {
    const int nfft = next_pow2(n);
    std::vector<std::complex<double>> spec(static_cast<size_t>(nfft));
    for (int k = 1; k <= nfft / 2; ++k) {
        const double scale = amp / std::sqrt(double(k));
        const std::complex<double> v(scale * rng.gaussian(), scale * rng.gaussian());
        spec[size_t(k)] = v;
        if (k < nfft / 2) spec[size_t(nfft - k)] = std::conj(v);
    }
    spec[size_t(nfft / 2)] = std::complex<double>(spec[size_t(nfft / 2)].real() * 1.4142135623730951, 0.0);
    fft(spec, true);
    std::vector<double> out(static_cast<size_t>(n));
    const double norm = std::sqrt(double(nfft)) * 0.5;
    for (int i = 0; i < n; ++i) out[size_t(i)] = spec[size_t(i)].real() * norm;
    return out;
}

}  // namespace detail

// Deterministic generation: trial t of class k uses the stream
// SplitMix64(seed XOR global_trial_index), so parallel and serial generation
// agree bitwise.
inline RawDataset generate_session(const SynthConfig& cfg) {
    cfg.validate();
    RawDataset ds;
    ds.fs = cfg.fs;
    ds.channel_names = standard_channel_names();
    ds.provenance = "synthetic seed " + std::to_string(cfg.seed);
    for (const auto& c : cfg.classes) ds.class_names.push_back(c.name);

    // one representative per sub-part: a class repeating an already-seen
    // sub-part (and everything after it) is a candidate, not a direct intent
    {
        std::vector<int> seen;
        ds.n_decodable = int(cfg.classes.size());
        for (size_t k = 0; k < cfg.classes.size(); ++k) {
            bool dup = false;
            for (int s : seen) dup = dup || s == cfg.classes[k].subpart;
            if (dup) {
                ds.n_decodable = int(k);
                break;
            }
            seen.push_back(cfg.classes[k].subpart);
        }
    }

    const int n_samp = int(cfg.fs * cfg.duration_s + 0.5);
    const int n_chan = int(ds.channel_names.size());
    std::vector<std::pair<int, int>> gpos(static_cast<size_t>(n_chan));
    for (int ch = 0; ch < n_chan; ++ch) gpos[size_t(ch)] = detail::grid_position(ds.channel_names[size_t(ch)]);

    // distinct rhythm bands present in every trial
    std::vector<std::pair<double, double>> bands;
    for (const auto& c : cfg.classes) {
        bool found = false;
        for (const auto& b : bands)
            if (b.first == c.band_lo && b.second == c.band_hi) found = true;
        if (!found) bands.emplace_back(c.band_lo, c.band_hi);
    }

    const double rhythm_amp = cfg.noise_amp * std::pow(10.0, cfg.snr_db / 20.0);
    const double two_pi = 6.283185307179586;
    uint64_t global_index = 0;
    for (size_t k = 0; k < cfg.classes.size(); ++k) {
        const auto& cls = cfg.classes[k];
        for (int t = 0; t < cfg.trials_per_class; ++t, ++global_index) {
            SplitMix64 rng(cfg.seed ^ global_index);
            RawTrial trial;
            trial.label = int(k);
            trial.samples = Tensor({n_chan, n_samp});

            // one coherent source per band at the band's center frequency;
            // the phase is the only per-trial nuisance variable
            std::vector<std::vector<double>> sources;
            for (const auto& b : bands) {
                const double f = 0.5 * (b.first + b.second);
                const double phase = cfg.phase_jitter * rng.uniform(0.0, two_pi);
                std::vector<double> s(static_cast<size_t>(n_samp));
                for (int i = 0; i < n_samp; ++i)
                    s[size_t(i)] = std::sin(two_pi * f * double(i) / cfg.fs + phase);
                sources.push_back(std::move(s));
            }

            for (int ch = 0; ch < n_chan; ++ch) {
                auto noise = detail::pink_noise(n_samp, cfg.noise_amp, rng);
                double* dst = trial.samples.data.data() + int64_t(ch) * n_samp;
                for (int i = 0; i < n_samp; ++i) dst[i] = noise[size_t(i)];
                for (size_t b = 0; b < bands.size(); ++b) {
                    double gain = 1.0;
                    const bool class_band =
                        bands[b].first == cls.band_lo && bands[b].second == cls.band_hi;
                    if (class_band && gpos[size_t(ch)].first >= 0) {
                        const double dr = double(gpos[size_t(ch)].first) - cls.focus_row;
                        const double dc = double(gpos[size_t(ch)].second) - cls.focus_col;
                        const double fall =
                            std::exp(-(dr * dr + dc * dc) / (2.0 * cfg.focus_sigma * cfg.focus_sigma));
                        gain = 1.0 - cls.depth * fall;
                    }
                    const double a = rhythm_amp * gain;
                    const double* src = sources[b].data();
                    for (int i = 0; i < n_samp; ++i) dst[i] += a * src[i];
                }
            }
            ds.trials.push_back(std::move(trial));
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Grid (preprocessed) datasets.
// ---------------------------------------------------------------------------

struct GridDataset {
    double fs = 250.0;
    int n_classes = 3;
    std::vector<std::string> class_names;
    std::vector<GridEpoch> trials;
    std::string provenance;

    std::vector<int> indices_of(int label) const {
        std::vector<int> idx;
        for (size_t i = 0; i < trials.size(); ++i)
            if (trials[i].label == label) idx.push_back(int(i));
        return idx;
    }
};

inline GridDataset preprocess_dataset(const RawDataset& raw, const PreprocessConfig& cfg = {}) {
    const auto filters = PreprocessFilters::design(raw.fs, cfg);
    GridDataset out;
    out.fs = filters.target_fs;
    out.class_names = raw.class_names;
    out.n_classes = raw.n_decodable > 0 ? raw.n_decodable : int(raw.class_names.size());
    out.provenance = raw.provenance + " | preprocessed";
    RawRecord rec;
    rec.fs = raw.fs;
    rec.channel_names = raw.channel_names;
    for (const auto& t : raw.trials) {
        rec.samples = t.samples;
        out.trials.push_back(preprocess_trial(rec, t.label, filters));
    }
    return out;
}

// ---------------------------------------------------------------------------
// On-disk format: magic line, one JSON-style manifest line, '\n', then a
// little-endian 32-bit float payload (trial-major, channel-major, time-major)
// guarded by an FNV-1a 64 checksum.
// ---------------------------------------------------------------------------

namespace detail {

inline uint64_t fnv1a64(const uint8_t* p, size_t n) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline void store_f32_le(std::vector<uint8_t>& buf, double v) {
    float f = float(v);
    uint32_t u;
    std::memcpy(&u, &f, 4);
    buf.push_back(uint8_t(u & 0xff));
    buf.push_back(uint8_t((u >> 8) & 0xff));
    buf.push_back(uint8_t((u >> 16) & 0xff));
    buf.push_back(uint8_t((u >> 24) & 0xff));
}

inline double load_f32_le(const uint8_t* p) {
    uint32_t u = uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) |
                 (uint32_t(p[3]) << 24);
    float f;
    std::memcpy(&f, &u, 4);
    return double(f);
}

}  // namespace detail

}  // namespace grn
