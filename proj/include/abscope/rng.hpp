#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace abscope {

/// Identifier recorded in every RawScan manifest. Bump the suffix if any of the
/// algorithms below change.
inline constexpr std::string_view kRngId = "xoshiro256starstar-splitmix64-v1";

/// SplitMix64 finalizer used as a stateless 64-bit mixing function.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    std::uint64_t z = x + 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Per-pixel seed: splitmix64(base ^ splitmix64((row << 32) | col)).
/// Depends only on grid coordinates, never on execution order.
constexpr std::uint64_t derive_pixel_seed(std::uint64_t base_seed, std::uint32_t row, std::uint32_t col) {
    return splitmix64(base_seed ^ splitmix64((static_cast<std::uint64_t>(row) << 32) | col));
}

/// xoshiro256** 1.0 (Blackman & Vigna), state filled from successive
/// splitmix64 outputs of the seed.
class Xoshiro256 {
public:
    explicit constexpr Xoshiro256(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : state_) {
            word = splitmix64(x);
            x += 0x9E3779B97F4A7C15ULL;
        }
    }

    constexpr std::uint64_t next() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    constexpr double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> state_{};
};

}  // namespace abscope
