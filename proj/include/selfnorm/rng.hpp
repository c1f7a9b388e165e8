#pragma once

// Counter-based random numbers (Philox4x32-10, Salmon et al., SC'11).
//
// Every draw is a pure function of (key, counter), so replicate r of an
// experiment sees the same numbers no matter which thread produces it or in
// which order replicates are scheduled.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace selfnorm {

namespace philox {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline Counter round(Counter ctr, Key key) {
    constexpr std::uint64_t kM0 = 0xD2511F53u;
    constexpr std::uint64_t kM1 = 0xCD9E8D57u;
    const std::uint64_t p0 = kM0 * ctr[0];
    const std::uint64_t p1 = kM1 * ctr[2];
    return {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
            static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
}

inline Counter generate(Counter ctr, Key key) {
    constexpr std::uint32_t kW0 = 0x9E3779B9u;
    constexpr std::uint32_t kW1 = 0xBB67AE85u;
    for (int i = 0; i < 10; ++i) {
        ctr = round(ctr, key);
        key[0] += kW0;
        key[1] += kW1;
    }
    return ctr;
}

}  // namespace philox

// SplitMix64 finaliser; used to derive independent seeds from (seed, tag).
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return mix64(seed ^ mix64(tag));
}

// Uniform in the open interval (0, 1) from the top 53 bits.
inline double to_unit(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Two 64-bit words addressed by (seed, replicate, position).
inline std::array<std::uint64_t, 2> block(std::uint64_t seed, std::uint64_t replicate, std::uint64_t position) {
    const philox::Counter ctr{static_cast<std::uint32_t>(position), static_cast<std::uint32_t>(position >> 32),
                              static_cast<std::uint32_t>(replicate), static_cast<std::uint32_t>(replicate >> 32)};
    const philox::Key key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    const auto out = philox::generate(ctr, key);
    return {(static_cast<std::uint64_t>(out[0]) << 32) | out[1], (static_cast<std::uint64_t>(out[2]) << 32) | out[3]};
}

// Sequential stream over the blocks of one replicate.
class CounterStream {
public:
    CounterStream(std::uint64_t seed, std::uint64_t replicate) : seed_(seed), replicate_(replicate) {}

    std::uint64_t next_u64() {
        if (slot_ == 2) {
            buf_ = block(seed_, replicate_, position_++);
            slot_ = 0;
        }
        return buf_[slot_++];
    }

    double uniform() { return to_unit(next_u64()); }

    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t seed_;
    std::uint64_t replicate_;
    std::uint64_t position_ = 0;
    std::array<std::uint64_t, 2> buf_{};
    int slot_ = 2;
};

}  // namespace selfnorm
