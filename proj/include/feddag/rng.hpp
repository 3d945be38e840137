#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace feddag {

// Counter-based deterministic random stream (Philox4x32-10).
// The integer core is pure 32/64-bit arithmetic, so a given seed produces
// the same stream on every platform. Streams are split by assigning each
// child a distinct 64-bit stream id that lives in the upper counter words;
// a parent and its splits never overlap.
class Rng {
  public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint32_t next_u32();
    std::uint64_t next_u64();

    // Uniform on [0, 1), 53 random mantissa bits.
    double next_double();

    // Standard normal via Box-Muller (second value cached).
    double next_normal();

    // Uniform integer in [0, bound), bound >= 1, rejection-sampled.
    std::uint64_t next_below(std::uint64_t bound);

    // First k entries of a random permutation of {0, ..., n-1}.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

    // Independent child stream. Children of distinct ids, and the parent
    // itself, never share counter blocks.
    Rng split(std::uint64_t stream_id) const;

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

  private:
    void refill();

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> counter_;
    std::array<std::uint32_t, 4> block_{};
    int block_pos_ = 4;  // forces refill on first draw
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

// Raw Philox4x32-10 block function, exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

}  // namespace feddag
