#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace qrd {

// Counter-based generator: Philox4x32-10.
//
// Stream layout (the reproducibility contract recorded in dataset files):
//   key     = { lo32(key64), hi32(key64) }
//   counter = { lo32(block), hi32(block), lo32(stream), hi32(stream) }
// where `block` increments once per 4-word batch. A (key, stream) pair is an
// independent substream; (key, shot index) fully determines a simulated shot.
class PhiloxRng {
public:
    static constexpr std::string_view kName = "philox4x32-10";

    PhiloxRng(std::uint64_t key, std::uint64_t stream);

    std::uint32_t next_u32();
    std::uint64_t next_u64();

    // Uniform in [0, 1) with 53 random bits.
    double uniform();

    // Uniform integer in [0, n), unbiased (rejection sampling). n >= 1.
    std::uint64_t uniform_below(std::uint64_t n);

    // Standard normal via Box-Muller; the spare value is cached.
    double normal();

    // Exponential with the given mean (> 0).
    double exponential(double mean);

    // One raw Philox block for the given counter/key, no state involved.
    static std::array<std::uint32_t, 4> block(const std::array<std::uint32_t, 4>& counter,
                                              const std::array<std::uint32_t, 2>& key);

private:
    void refill();

    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_;
    std::uint64_t block_index_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    int buffer_pos_ = 4;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

// 64-bit FNV-1a, used to hash subsystem names.
std::uint64_t fnv1a64(std::string_view s);

// splitmix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);

// Subsystem seed derivation: splitmix64(seed ^ fnv1a64(name)).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view subsystem);

}  // namespace qrd
