#pragma once

#include <cstdint>
#include <limits>

namespace sbmre {

// SplitMix64 finalizer: the standard 64-bit avalanche mix.
inline std::uint64_t splitmix_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// zigzag: injective map Z -> N (0,-1,1,-2,2,... -> 0,1,2,3,4,...)
inline std::uint64_t zigzag(std::int64_t x) {
  return (static_cast<std::uint64_t>(x) << 1) ^ static_cast<std::uint64_t>(x >> 63);
}

// Counter-based SplitMix64 stream, usable as a UniformRandomBitGenerator
// with std:: distributions.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    state_ += 0x9E3779B97F4A7C15ull;
    return splitmix_finalize(state_);
  }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

// Derives an independent stream seed for (base seed, purpose tag, replica).
// Keeping movement and environment streams on distinct tags means the
// annealed/quenched switch never perturbs movement randomness.
inline std::uint64_t derive_stream_seed(std::uint64_t base, std::uint64_t tag,
                                        std::uint64_t index) {
  return splitmix_finalize(base ^ tag * 0x9E3779B97F4A7C15ull ^
                           index * 0xBF58476D1CE4E5B9ull);
}

namespace stream_tag {
inline constexpr std::uint64_t movement = 0x6D6F7665ull;  // "move"
inline constexpr std::uint64_t environment = 0x656E7669ull;  // "envi"
inline constexpr std::uint64_t noise = 0x6E6F6973ull;  // "nois"
}  // namespace stream_tag

}  // namespace sbmre
