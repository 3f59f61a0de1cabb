#ifndef AUTOBO_RANDOM_HPP
#define AUTOBO_RANDOM_HPP
#pragma once

#include <cstdint>
#include <random>

namespace autobo {

using Rng = std::mt19937_64;

// Independent sub-streams of one run seed. The tag values are part of the
// reproducibility contract: changing them changes every recorded trace.
enum class Stream : std::uint32_t {
    design = 1,
    candidates = 2,
    policy = 3,
    surrogate = 4,
    observation_noise = 5,
    recommendation = 6,
    jitter = 7,
    bootstrap = 8,
};

inline Rng make_rng(std::uint64_t seed, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return Rng(seq);
}

inline Rng make_rng(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32)};
    return Rng(seq);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

} // namespace autobo

#endif // AUTOBO_RANDOM_HPP
