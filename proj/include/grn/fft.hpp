#pragma once

#include <complex>
#include <vector>

#include "grn/error.hpp"

namespace grn {

inline int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

// In-place iterative radix-2 FFT; size must be a power of two.
inline void fft(std::vector<std::complex<double>>& a, bool inverse = false) {
    const size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0)
        fail(ErrorKind::Parameter, "fft: size must be a nonzero power of two");
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * 3.141592653589793238462643 / double(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (auto& x : a) x /= double(n);
}

// Magnitude spectrum of a real signal, zero-padded to the next power of two.
inline std::vector<double> magnitude_spectrum(const std::vector<double>& x) {
    if (x.empty()) fail(ErrorKind::Parameter, "magnitude_spectrum: empty input");
    const int n = next_pow2(int(x.size()));
    std::vector<std::complex<double>> a(static_cast<size_t>(n));
    for (size_t i = 0; i < x.size(); ++i) a[i] = x[i];
    fft(a);
    std::vector<double> mag(static_cast<size_t>(n / 2 + 1));
    for (size_t i = 0; i < mag.size(); ++i) mag[i] = std::abs(a[i]);
    return mag;
}

}  // namespace grn
