#pragma once

#include <cstdint>

namespace sspread {

/// Stateless 64-bit avalanche mixer (the splitmix64 finalizer). Every output
/// bit depends on every input bit; passes the usual avalanche batteries.
constexpr uint64_t avalanche64(uint64_t x) noexcept {
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Tiny deterministic PRNG (splitmix64). Used wherever reproducible streams
/// are needed independent of the standard library's distributions.
class SplitMix64 {
  public:
    explicit constexpr SplitMix64(uint64_t seed) noexcept : state_(seed) {}

    constexpr uint64_t next() noexcept {
        state_ += 0x9E3779B97F4A7C15ull;
        return avalanche64(state_);
    }

    /// Uniform in [0, bound). bound >= 1.
    constexpr uint64_t next_below(uint64_t bound) noexcept {
        // 128-bit multiply-shift reduction; bias < bound / 2^64.
        return static_cast<uint64_t>((static_cast<__uint128_t>(next()) * bound) >> 64);
    }

    /// Uniform double in [0, 1).
    constexpr double next_double() noexcept {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

  private:
    uint64_t state_;
};

/// Seeded family of deterministic 32-bit hash functions. The sketches draw
/// all of their hash functions (pair sampling, slot selection, indicator
/// bits, row/column placement) from one family, keyed by a small function
/// index, so that two structures built from the same seed make identical
/// placement decisions.
class HashFamily {
  public:
    explicit constexpr HashFamily(uint64_t seed) noexcept : seed_(seed) {}

    constexpr uint64_t seed() const noexcept { return seed_; }

    /// 32-bit hash of `key` under function `index`; uniform over [0, 2^32).
    constexpr uint32_t u32(uint32_t index, uint32_t key) const noexcept {
        const uint64_t sub = avalanche64(seed_ + 0x9E3779B97F4A7C15ull * (index + 1));
        return static_cast<uint32_t>(avalanche64(sub ^ key));
    }

    /// Hash reduced to [0, range); range >= 1. Exactly uniform for power-of-two
    /// ranges, bias below range/2^32 otherwise.
    constexpr uint32_t reduce(uint32_t index, uint32_t key, uint32_t range) const noexcept {
        return static_cast<uint32_t>((static_cast<uint64_t>(u32(index, key)) * range) >> 32);
    }

  private:
    uint64_t seed_;
};

// Function indices. Row hashes for an estimator array occupy
// kRowHashBase + row.
inline constexpr uint32_t kSampleHash = 0;      // opposite-host sampling + linear slot source
inline constexpr uint32_t kRoughSlotHash = 1;   // rough-estimator slot choice
inline constexpr uint32_t kIndicatorHash = 2;   // bit choice inside the 16-bit indicator
inline constexpr uint32_t kRowHashBase = 8;

}  // namespace sspread
