#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace grn {

// splitmix64 (Vigna's public-domain constants). Chosen as the project-wide
// generator because the whole algorithm fits in a paragraph, so any
// reimplementation can reproduce our datasets bit-exactly.
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed = 0) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0,1), 53-bit mantissa
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; draws two uniforms per call, second value discarded so the
    // stream position is a pure function of the call count.
    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // integer in [0, n)
    uint64_t below(uint64_t n) { return next() % n; }

    uint64_t state() const { return state_; }

private:
    uint64_t state_;
};

// n distinct indices from [0, pool) via partial Fisher-Yates, ascending pool order.
inline std::vector<int> sample_without_replacement(int pool, int n, SplitMix64& rng) {
    std::vector<int> idx(pool);
    for (int i = 0; i < pool; ++i) idx[i] = i;
    for (int i = 0; i < n; ++i) {
        int j = i + int(rng.below(uint64_t(pool - i)));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(n);
    return idx;
}

}  // namespace grn
