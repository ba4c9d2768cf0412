#pragma once

#include <array>
#include <cstdint>

namespace treecast {

// Philox4x32-10 counter-based generator. Every (counter, key) pair yields an
// independent 128-bit block, so random streams can be addressed directly by
// logical coordinates (level, state, sample, child) instead of being drawn
// from shared mutable state. Results are therefore identical for any thread
// count or evaluation order. Known-answer vectors are pinned in
// tests/test_rng.cpp.
namespace philox {

inline constexpr std::uint32_t mul_a = 0xD2511F53u;
inline constexpr std::uint32_t mul_b = 0xCD9E8D57u;
inline constexpr std::uint32_t weyl_a = 0x9E3779B9u;
inline constexpr std::uint32_t weyl_b = 0xBB67AE85u;

inline std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                          std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t{mul_a} * ctr[0];
        const std::uint64_t p1 = std::uint64_t{mul_b} * ctr[2];
        ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
               static_cast<std::uint32_t>(p1),
               static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
               static_cast<std::uint32_t>(p0)};
        key[0] += weyl_a;
        key[1] += weyl_b;
    }
    return ctr;
}

}  // namespace philox

// Stream domains keep independent subsystems from colliding on a shared seed.
enum class rng_domain : std::uint32_t {
    tree_broadcast = 1,
    pop_evolve = 2,
    z_products = 3,
};

// Two raw 64-bit words for one logical event.
struct rng_words {
    std::uint64_t hi;
    std::uint64_t lo;
};

inline rng_words draw_words(std::uint64_t seed, rng_domain dom,
                            std::uint32_t w1, std::uint32_t w2,
                            std::uint32_t w3) {
    const auto out =
        philox::block({static_cast<std::uint32_t>(dom), w1, w2, w3},
                      {static_cast<std::uint32_t>(seed),
                       static_cast<std::uint32_t>(seed >> 32)});
    return {(std::uint64_t{out[0]} << 32) | out[1],
            (std::uint64_t{out[2]} << 32) | out[3]};
}

inline double unit_double(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Unbiased-to-2^-64 index in [0, n) via the multiply-shift trick.
inline std::uint64_t bounded_index(std::uint64_t bits, std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(bits) * n) >> 64);
}

}  // namespace treecast
