#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace spinchain {

// Philox4x32-10 counter-based generator. A stream is addressed by
// (seed, stream): the 64-bit seed is the cipher key and the stream id is
// held in the upper counter words, so replica streams never overlap.
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t stream = 0)
      : key_{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)},
        stream_(stream) {}

  static std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> ctr,
                                            std::array<uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += 0x9E3779B9u;
        key[1] += 0xBB67AE85u;
      }
      const uint64_t p0 = static_cast<uint64_t>(0xD2511F53u) * ctr[0];
      const uint64_t p1 = static_cast<uint64_t>(0xCD9E8D57u) * ctr[2];
      const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
      const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

  uint64_t next_u64() {
    if (pos_ == 0) {
      const std::array<uint32_t, 4> ctr = {
          static_cast<uint32_t>(block_), static_cast<uint32_t>(block_ >> 32),
          static_cast<uint32_t>(stream_), static_cast<uint32_t>(stream_ >> 32)};
      buf_ = philox4x32(ctr, key_);
      ++block_;
    }
    const int i = 2 * pos_;
    pos_ = (pos_ + 1) & 1;
    return (static_cast<uint64_t>(buf_[i + 1]) << 32) | buf_[i];
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  // Uniform in (0, 1]; safe under log().
  double uniform_pos() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double gaussian() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
    const double phi = 6.283185307179586476925286766559 * uniform();
    cached_ = r * std::sin(phi);
    have_cached_ = true;
    return r * std::cos(phi);
  }

  uint64_t stream() const { return stream_; }

 private:
  std::array<uint32_t, 2> key_;
  uint64_t stream_ = 0;
  uint64_t block_ = 0;
  std::array<uint32_t, 4> buf_{};
  int pos_ = 0;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace spinchain
