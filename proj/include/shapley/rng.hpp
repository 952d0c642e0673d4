#pragma once

#include <cmath>
#include <cstdint>

namespace shapley {

// Counter-based splittable random stream.
//
// Each stream is a (key, counter) pair; draws hash the counter with a
// SplitMix64-style finalizer, so a stream is a pure function of its key.
// child(i) derives an independent stream, which makes parallel replication
// deterministic: give every task a child keyed by its index and the results
// do not depend on scheduling.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : key_(seed), counter_(0) {}

    // Independent substream; children of distinct indices do not overlap.
    [[nodiscard]] RngStream child(std::uint64_t index) const {
        return RngStream(mix(key_ ^ mix(index + 0xA0761D6478BD642FULL)), 0);
    }

    std::uint64_t next_u64() {
        return mix(key_ + 0x9E3779B97F4A7C15ULL * ++counter_);
    }

    // Uniform on [0, 1), 53-bit resolution.
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform on (0, 1]; safe as a log() argument.
    double next_uniform_pos() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller (cosine branch only, two draws per
    // normal, no carried state).
    double next_normal() {
        const double u1 = next_uniform_pos();
        const double u2 = next_uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    // Uniform integer in [0, bound) by rejection; bound >= 1.
    std::uint64_t next_below(std::uint64_t bound) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % bound;
    }

    [[nodiscard]] std::uint64_t key() const { return key_; }

private:
    RngStream(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}

    // SplitMix64 finalizer.
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t key_;
    std::uint64_t counter_;
};

} // namespace shapley
