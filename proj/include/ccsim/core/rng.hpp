/**
 * Counter-based deterministic random streams.
 *
 * Every random draw in the system comes from a substream keyed by
 * (seed, stream name, counter). Results are therefore independent of
 * thread scheduling and arrival order: the detections for frame 17 are
 * the same whether they are computed first or last. The generator is
 * splitmix64 over a hashed key; distributions are implemented here
 * rather than taken from <random> so that streams are identical across
 * standard library implementations.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace ccsim {

constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : s) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x00000100000001b3ull;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

class KeyedRng {
public:
    KeyedRng(std::uint64_t seed, std::string_view stream, std::uint64_t counter)
        : state_(mix_key(seed, fnv1a64(stream), counter)) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    // Uniform in [0,1) with 53 random mantissa bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Marsaglia polar method; caches the spare deviate.
    double normal(double mean = 0.0, double stddev = 1.0) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + stddev * spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return mean + stddev * u * m;
    }

    double lognormal(double mu, double sigma) { return std::exp(normal(mu, sigma)); }

    // Knuth's method; fine for the small per-frame rates used here.
    std::uint32_t poisson(double rate) {
        if (rate <= 0.0) return 0;
        const double limit = std::exp(-rate);
        double p = 1.0;
        std::uint32_t k = 0;
        do {
            ++k;
            p *= uniform();
        } while (p > limit);
        return k - 1;
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    static std::uint64_t mix_key(std::uint64_t seed, std::uint64_t stream_hash,
                                 std::uint64_t counter) {
        std::uint64_t s = seed ^ (stream_hash * 0x9e3779b97f4a7c15ull);
        splitmix64(s);
        s ^= counter * 0xda942042e4dd58b5ull;
        splitmix64(s);
        return s;
    }

    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace ccsim
