#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace refac {

/// Counter-based random number generator (Philox4x32-10, Salmon et al. 2011).
///
/// The 64-bit seed is the key; the 128-bit counter is split into a 64-bit
/// stream id and a 64-bit block position. Any (seed, stream) pair therefore
/// addresses an independent sequence, and `substream(i)` derives a child
/// stream id as `splitmix64(stream ^ splitmix64(i + 0x9E3779B97F4A7C15))`.
/// The algorithm is fully specified here so that draws can be reproduced in
/// other languages.
///
/// Derived variates:
///   uniform()  = ((u64 >> 11) + 0.5) * 2^-53, strictly inside (0, 1)
///   normal()   = Box-Muller on two uniforms, second value cached
///   below(n)   = Lemire's nearly-divisionless bounded integer on 32-bit words
class Rng {
 public:
  using result_type = std::uint32_t;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  Rng substream(std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  double uniform();
  double normal();
  std::uint32_t below(std::uint32_t n);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u32(); }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int index_ = 4;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

namespace detail {
/// Raw Philox4x32 block function with 10 rounds.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);
}  // namespace detail

}  // namespace refac
