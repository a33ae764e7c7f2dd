#include "pcstream/random.hpp"

namespace pcstream {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t stream_seed, std::uint64_t frame_id) noexcept {
  return splitmix64(stream_seed ^ splitmix64(frame_id + 1));
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  // 2^64 mod bound, computed without 128-bit arithmetic.
  const std::uint64_t reject_below = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t draw = rng();
    if (draw >= reject_below) return draw % bound;
  }
}

}  // namespace pcstream
