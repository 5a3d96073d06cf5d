#pragma once

#include <cstdint>

namespace epk {

/// Counter-based SplitMix64 stream. Output i of a stream seeded with s is
/// mix(s + (i + 1) * 0x9E3779B97F4A7C15), where mix is the SplitMix64
/// finalizer. The algorithm is fixed so generated data is identical on every
/// platform; normals come from Box–Muller on this stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept : seed_(seed) {}

    static std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t next_u64() noexcept {
        ++counter_;
        return mix(seed_ + counter_ * 0x9E3779B97F4A7C15ULL);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Uses rejection to stay unbiased.
    std::uint64_t below(std::uint64_t n) noexcept;

    double normal() noexcept;
    double normal(double mean, double sigma) noexcept { return mean + sigma * normal(); }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t draws() const noexcept { return counter_; }

    /// Independent child stream, e.g. one per generated object.
    Rng fork(std::uint64_t tag) const noexcept { return Rng(mix(seed_ ^ mix(tag + 0x632BE59BD9B4E019ULL))); }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace epk
