#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace avth {

// Round halfway cases away from zero, the convention used everywhere a real
// value becomes an integer sample or coefficient.
inline long long iround(double v) {
    return std::llround(v);
}

inline uint8_t clamp_u8(double v) {
    long long r = iround(v);
    return static_cast<uint8_t>(std::clamp<long long>(r, 0, 255));
}

inline int16_t clamp_i16(double v) {
    long long r = iround(v);
    return static_cast<int16_t>(std::clamp<long long>(r, -32768, 32767));
}

// Deterministic, platform-independent RNG (splitmix64). std::mt19937 with
// std::normal_distribution is implementation-defined, which would break
// byte-identical parameter initialization across toolchains.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; one sample per call, cache discarded for simplicity.
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * M_PI * u2);
    }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) { return next_u64() % n; }

private:
    uint64_t state_;
};

}  // namespace avth
