#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "depulse/errors.hpp"

namespace depulse {

// Seedable generator with explicitly coded transforms so that a given seed
// produces the same stream on every platform/standard library. Streams for
// independent pulses are derived from (master seed, stream index).
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    static uint64_t mix(uint64_t seed, uint64_t stream) {
        // splitmix64 finalizer over the pair
        uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static Rng for_stream(uint64_t master_seed, uint64_t stream) {
        return Rng(mix(master_seed, stream));
    }

    uint64_t next_u64() { return gen_(); }

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1), safe for logs.
    double uniform_pos() {
        double u;
        do {
            u = uniform();
        } while (u <= 0.0);
        return u;
    }

    // Inclusive bounds, rejection sampling to stay unbiased.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        if (lo > hi) throw DimensionError("uniform_int: lo > hi");
        const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<int64_t>(gen_());  // full 64-bit range
        const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        uint64_t v;
        do {
            v = gen_();
        } while (v >= limit);
        return lo + static_cast<int64_t>(v % span);
    }

    // Box-Muller; deterministic, no state carried between calls.
    double normal() {
        const double u1 = uniform_pos();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Marsaglia-Tsang squeeze method; shape < 1 handled by boosting.
    double gamma(double shape, double scale) {
        if (shape <= 0.0 || scale <= 0.0) throw NumericError("gamma: shape/scale must be positive");
        if (shape < 1.0) {
            const double u = uniform_pos();
            return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform_pos();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
        }
    }

    // Inverse-Gamma with shape alpha and scale beta: 1/X ~ Gamma(alpha, 1/beta).
    double inverse_gamma(double alpha, double beta) { return beta / gamma(alpha, 1.0); }

private:
    std::mt19937_64 gen_;
};

}  // namespace depulse
