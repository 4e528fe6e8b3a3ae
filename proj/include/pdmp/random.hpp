#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace pdmp {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
///
/// The 64-bit seed is the key and the 64-bit stream id occupies the upper
/// half of the counter, so `Philox4x32(seed, r)` gives replicate `r` its own
/// sequence regardless of the order in which replicates are run.
class Philox4x32 {
 public:
  using result_type = std::uint64_t;
  using block_type = std::array<std::uint32_t, 4>;
  using key_type = std::array<std::uint32_t, 2>;

  explicit Philox4x32(std::uint64_t seed = 0, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (lane_ == 2) {
      refill();
    }
    const auto lo = static_cast<std::uint64_t>(block_[2 * lane_]);
    const auto hi = static_cast<std::uint64_t>(block_[2 * lane_ + 1]);
    ++lane_;
    return (hi << 32) | lo;
  }

  /// Independent generator sharing this seed.
  Philox4x32 split(std::uint64_t stream) const { return Philox4x32(seed_, stream); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  /// Raw bijection; exposed for known-answer tests.
  static block_type encrypt(block_type counter, key_type key) {
    counter = round(counter, key);
    for (int r = 1; r < 10; ++r) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
      counter = round(counter, key);
    }
    return counter;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static block_type round(const block_type& c, const key_type& k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }

  void refill() {
    const block_type counter{static_cast<std::uint32_t>(counter_),
                             static_cast<std::uint32_t>(counter_ >> 32),
                             static_cast<std::uint32_t>(stream_),
                             static_cast<std::uint32_t>(stream_ >> 32)};
    const key_type key{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
    block_ = encrypt(counter, key);
    ++counter_;
    lane_ = 0;
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  block_type block_{};
  unsigned lane_ = 2;
};

/// Uniform draw on the open interval (0, 1) with 53 bits of resolution.
template <class Engine>
double uniform01(Engine& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1p-53;
}

}  // namespace pdmp
