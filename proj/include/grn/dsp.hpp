#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "grn/error.hpp"
#include "grn/fft.hpp"

namespace grn {

// ---------------------------------------------------------------------------
// Second-order sections and IIR design (Butterworth band-pass, RBJ notch).
// ---------------------------------------------------------------------------

struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;  // denominator 1 + a1 z^-1 + a2 z^-2
};

struct BiquadChain {
    std::vector<Biquad> sections;
    std::string tag;

    int order() const { return 2 * int(sections.size()); }
};

inline std::complex<double> section_response(const Biquad& s, double omega) {
    const std::complex<double> z1 = std::polar(1.0, -omega);
    const std::complex<double> z2 = z1 * z1;
    return (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
}

inline std::complex<double> chain_response(const BiquadChain& c, double freq_hz, double fs) {
    const double omega = 2.0 * 3.141592653589793238462643 * freq_hz / fs;
    std::complex<double> h(1.0, 0.0);
    for (const auto& s : c.sections) h *= section_response(s, omega);
    return h;
}

inline double chain_gain(const BiquadChain& c, double freq_hz, double fs) {
    return std::abs(chain_response(c, freq_hz, fs));
}

inline std::pair<std::complex<double>, std::complex<double>> section_poles(const Biquad& s) {
    const std::complex<double> disc = std::sqrt(std::complex<double>(s.a1 * s.a1 - 4.0 * s.a2, 0.0));
    return {(-s.a1 + disc) / 2.0, (-s.a1 - disc) / 2.0};
}

inline bool chain_stable(const BiquadChain& c, double margin = 1e-9) {
    for (const auto& s : c.sections) {
        auto [p1, p2] = section_poles(s);
        if (std::abs(p1) >= 1.0 - margin || std::abs(p2) >= 1.0 - margin) return false;
    }
    return true;
}

// Butterworth band-pass of even analog order, bilinear-transformed and
// factored into second-order sections. Gain normalized at the geometric
// center frequency.
inline BiquadChain design_bandpass(double low_hz, double high_hz, double fs, int order = 4) {
    if (!(fs > 0.0) || !(low_hz > 0.0) || !(low_hz < high_hz) || !(high_hz < fs / 2.0))
        fail(ErrorKind::Parameter, "design_bandpass: need 0 < low < high < fs/2");
    if (order < 2 || order % 2 != 0)
        fail(ErrorKind::Parameter, "design_bandpass: order must be a positive even number");
    const double pi = 3.141592653589793238462643;
    const double fs2 = 2.0 * fs;
    const double w1 = fs2 * std::tan(pi * low_hz / fs);
    const double w2 = fs2 * std::tan(pi * high_hz / fs);
    const double w0 = std::sqrt(w1 * w2);
    const double bw = w2 - w1;

    // analog prototype poles -> band-pass poles -> digital poles
    std::vector<std::complex<double>> zpoles;
    for (int k = 0; k < order; ++k) {
        const double theta = pi * double(2 * k + order + 1) / double(2 * order);
        const std::complex<double> p(std::cos(theta), std::sin(theta));
        const std::complex<double> a = p * (bw / 2.0);
        const std::complex<double> d = std::sqrt(a * a - w0 * w0);
        for (const auto& s : {a + d, a - d}) zpoles.push_back((fs2 + s) / (fs2 - s));
    }

    // conjugate-symmetric set: keep upper-half poles, one section each,
    // zeros at z = +1 and z = -1
    BiquadChain chain;
    chain.tag = "butterworth band-pass " + std::to_string(low_hz) + "-" + std::to_string(high_hz) +
                " Hz, order " + std::to_string(order);
    for (const auto& p : zpoles) {
        if (p.imag() <= 0.0) continue;
        Biquad s;
        s.b0 = 1.0;
        s.b1 = 0.0;
        s.b2 = -1.0;
        s.a1 = -2.0 * p.real();
        s.a2 = std::norm(p);
        chain.sections.push_back(s);
    }
    if (int(chain.sections.size()) != order)
        fail(ErrorKind::Parameter, "design_bandpass: degenerate pole configuration");

    const double f_center = std::sqrt(low_hz * high_hz);
    const double g = chain_gain(chain, f_center, fs);
    const double per_section = std::pow(1.0 / g, 1.0 / double(chain.sections.size()));
    for (auto& s : chain.sections) {
        s.b0 *= per_section;
        s.b1 *= per_section;
        s.b2 *= per_section;
    }
    return chain;
}

// RBJ-cookbook second-order notch.
inline BiquadChain design_notch(double f0_hz, double q, double fs) {
    if (!(fs > 0.0) || !(f0_hz > 0.0) || !(f0_hz < fs / 2.0))
        fail(ErrorKind::Parameter, "design_notch: need 0 < f0 < fs/2");
    if (!(q > 0.0)) fail(ErrorKind::Parameter, "design_notch: q must be positive");
    const double w0 = 2.0 * 3.141592653589793238462643 * f0_hz / fs;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    Biquad s;
    s.b0 = 1.0 / a0;
    s.b1 = -2.0 * std::cos(w0) / a0;
    s.b2 = 1.0 / a0;
    s.a1 = -2.0 * std::cos(w0) / a0;
    s.a2 = (1.0 - alpha) / a0;
    BiquadChain chain;
    chain.tag = "notch " + std::to_string(f0_hz) + " Hz, Q " + std::to_string(q);
    chain.sections.push_back(s);
    return chain;
}

// ---------------------------------------------------------------------------
// Zero-phase filtering.
// ---------------------------------------------------------------------------

namespace detail {

// steady-state initial conditions for a unit-amplitude constant input (DF2T)
inline std::pair<double, double> section_zi(const Biquad& s) {
    const double dc = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    return {dc - s.b0, s.b2 - s.a2 * dc};
}

inline void sosfilt_inplace(const std::vector<Biquad>& sections, std::vector<double>& x) {
    for (const auto& s : sections) {
        auto [zi1, zi2] = section_zi(s);
        double z1 = zi1 * x[0], z2 = zi2 * x[0];
        for (double& v : x) {
            const double y = s.b0 * v + z1;
            z1 = s.b1 * v - s.a1 * y + z2;
            z2 = s.b2 * v - s.a2 * y;
            v = y;
        }
    }
}

inline std::vector<double> filtfilt_once(const BiquadChain& c, const std::vector<double>& x,
                                         int padlen) {
    const int n = int(x.size());
    std::vector<double> ext;
    ext.reserve(size_t(n + 2 * padlen));
    for (int i = padlen; i >= 1; --i) ext.push_back(2.0 * x[0] - x[size_t(i)]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (int i = n - 2; i >= n - 1 - padlen; --i) ext.push_back(2.0 * x[size_t(n - 1)] - x[size_t(i)]);
    sosfilt_inplace(c.sections, ext);
    std::reverse(ext.begin(), ext.end());
    sosfilt_inplace(c.sections, ext);
    std::reverse(ext.begin(), ext.end());
    return std::vector<double>(ext.begin() + padlen, ext.begin() + padlen + n);
}

}  // namespace detail

// Forward-backward application with odd reflected-edge padding of length
// 3 × filter order. The result is averaged with its time-reversed twin so the
// operation commutes with time reversal bit-exactly.
inline std::vector<double> filtfilt(const BiquadChain& c, const std::vector<double>& signal) {
    const int padlen = 3 * c.order();
    if (int(signal.size()) <= padlen)
        fail(ErrorKind::Length, "filtfilt: signal length " + std::to_string(signal.size()) +
                                    " must exceed 3 × filter order (" + std::to_string(padlen) + ")");
    std::vector<double> fwd = detail::filtfilt_once(c, signal, padlen);
    std::vector<double> rev(signal.rbegin(), signal.rend());
    rev = detail::filtfilt_once(c, rev, padlen);
    const size_t n = signal.size();
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = 0.5 * (fwd[i] + rev[n - 1 - i]);
    return out;
}

// Keep every factor-th sample starting at index 0 (band-limiting is the
// caller's responsibility).
inline std::vector<double> decimate(const std::vector<double>& signal, int factor) {
    if (factor <= 0) fail(ErrorKind::Parameter, "decimate: factor must be positive");
    std::vector<double> out;
    out.reserve((signal.size() + size_t(factor) - 1) / size_t(factor));
    for (size_t i = 0; i < signal.size(); i += size_t(factor)) out.push_back(signal[i]);
    return out;
}

// ---------------------------------------------------------------------------
// FFT feature-band analysis: fraction of filters whose peak (DC excluded)
// lies in the beta band [12, 30] Hz.
// ---------------------------------------------------------------------------

enum class Band { Delta, Theta, AlphaMu, Beta, Gamma };

inline Band classify_band(double f) {
    if (f < 4.0) return Band::Delta;
    if (f < 8.0) return Band::Theta;
    if (f < 12.0) return Band::AlphaMu;
    if (f <= 30.0) return Band::Beta;
    return Band::Gamma;
}

// feature_maps: filters × time (row-major), sampled at fs_feature.
inline double beta_fraction(const std::vector<std::vector<double>>& feature_maps,
                            double fs_feature) {
    if (feature_maps.empty()) fail(ErrorKind::Parameter, "beta_fraction: empty input");
    int in_beta = 0;
    for (const auto& row : feature_maps) {
        if (row.size() < 8) fail(ErrorKind::Parameter, "beta_fraction: need >= 8 time points per filter");
        const auto mag = magnitude_spectrum(row);
        const int nfft = 2 * (int(mag.size()) - 1);
        size_t peak = 1;
        for (size_t i = 2; i < mag.size(); ++i)
            if (mag[i] > mag[peak]) peak = i;
        const double f = double(peak) * fs_feature / double(nfft);
        if (classify_band(f) == Band::Beta) ++in_beta;
    }
    return double(in_beta) / double(feature_maps.size());
}

}  // namespace grn
