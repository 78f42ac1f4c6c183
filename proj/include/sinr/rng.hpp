// Copyright (c) 2026 the SI-NR authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sinr {

namespace detail {

// splitmix64, used for seed mixing and stream derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace detail

// Deterministic random stream. The mt19937_64 core is fully specified by the
// standard and all value conversions are done by hand, so identical seeds give
// identical draws on every platform and both ends of a connection can
// regenerate the same permutation from a shared seed.
//
// Streams are not shareable across workers; derive one child stream per
// worker/sample instead.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : root_seed_(seed) {
        std::uint64_t s = seed;
        eng_.seed(detail::splitmix64(s));
    }

    std::uint64_t root_seed() const { return root_seed_; }

    // Independent child stream for (root seed, stream id).
    RngStream derive(std::uint64_t stream_id) const {
        std::uint64_t s = root_seed_ ^ (0x5851f42d4c957f2dull * (stream_id + 1));
        return RngStream(detail::splitmix64(s));
    }

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, bound). bound must be >= 1.
    std::uint64_t uniform_int(std::uint64_t bound) {
        // rejection sampling on the top bits keeps this exactly uniform
        std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            std::uint64_t r = eng_();
            if (r >= threshold) return r % bound;
        }
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller; one spare value is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double radius = std::sqrt(-2.0 * std::log(u1));
        double angle = 6.283185307179586476925286766559 * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    std::uint64_t root_seed_;
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace sinr
