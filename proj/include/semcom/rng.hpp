#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>

namespace semcom::rng {

// Counter-style seeding: every consumer derives its own stream from
// (master seed, purpose tag, indices...). Streams never share state, so
// parallel rollouts and checkpoint resume stay reproducible without
// serializing engine internals.

inline std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix(std::uint64_t seed, std::uint64_t v) {
    std::uint64_t x = seed ^ (0x9e3779b97f4a7c15ULL + (v << 6) + (v >> 2));
    return splitmix64(x);
}

inline std::uint64_t hash_str(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// xoshiro256++ engine.
class Stream {
  public:
    explicit Stream(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : state_) w = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0,1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Rejection keeps the draw unbiased for any n.
        const std::uint64_t threshold = (~n + 1) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Box-Muller without the usual cached second value; statelessness keeps
    // streams trivially serializable.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    double normal(double mean, double std) { return mean + std * normal(); }

    // Unit-mean exponential via inverse transform; strictly positive.
    double exponential() {
        double u = uniform();
        while (u <= 0.0 || u >= 1.0) u = uniform();
        return -std::log1p(-u);
    }

    // Marsaglia-Tsang for shape >= 1, boost for shape < 1.
    double gamma(double shape) {
        if (shape < 1.0) {
            const double u = uniform();
            return gamma(shape + 1.0) * std::pow(u > 0.0 ? u : 1e-300, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    double beta(double a, double b) {
        const double x = gamma(a);
        const double y = gamma(b);
        return x / (x + y);
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::array<std::uint64_t, 4> state_{};
};

// Derive a stream key from a master seed, a purpose tag, and indices.
template <typename... Ix>
std::uint64_t derive(std::uint64_t master, std::string_view tag, Ix... idx) {
    std::uint64_t key = mix(master, hash_str(tag));
    ((key = mix(key, static_cast<std::uint64_t>(idx))), ...);
    return key;
}

template <typename... Ix>
Stream stream(std::uint64_t master, std::string_view tag, Ix... idx) {
    return Stream(derive(master, tag, idx...));
}

}  // namespace semcom::rng
