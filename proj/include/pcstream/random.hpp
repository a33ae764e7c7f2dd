#pragma once

#include <cstdint>
#include <random>

namespace pcstream {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Per-frame seed: splitmix64(stream_seed ^ splitmix64(frame_id + 1)).
std::uint64_t mix_seed(std::uint64_t stream_seed, std::uint64_t frame_id) noexcept;

/// Unbiased integer in [0, bound) by rejection of the low `2^64 mod bound` values.
/// bound must be nonzero.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);

}  // namespace pcstream
