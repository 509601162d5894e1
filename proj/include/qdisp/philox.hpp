#pragma once

// Philox4x32-10 counter-based generator (Salmon et al., Random123) and a small
// Gaussian-variate stream on top of it.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace qdisp {

class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit constexpr Philox4x32(Key key) : key_(key) {}
  explicit constexpr Philox4x32(std::uint64_t seed)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  constexpr Counter operator()(Counter ctr) const {
    Key k = key_;
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        k[0] += kWeyl0;
        k[1] += kWeyl1;
      }
      ctr = single_round(ctr, k);
    }
    return ctr;
  }

  constexpr const Key& key() const { return key_; }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter single_round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }

  Key key_;
};

/// Standard normal variates for one (stream, index) pair.
///
/// Each Philox block yields two 53-bit uniforms in (0,1] and, through Box-Muller,
/// two normals. Block `b` of item `index` on `stream` uses the counter
/// (index_lo, index_hi, b, stream), so any item can be regenerated on its own.
class NormalStream {
 public:
  NormalStream(const Philox4x32& gen, std::uint64_t index, std::uint32_t stream = 0)
      : gen_(gen), index_(index), stream_(stream) {}

  /// The pair of normals held by block `block`.
  std::array<double, 2> pair(std::uint32_t block) const {
    const auto out = gen_({static_cast<std::uint32_t>(index_), static_cast<std::uint32_t>(index_ >> 32),
                           block, stream_});
    const double u1 = to_unit(out[0], out[1]);
    const double u2 = to_unit(out[2], out[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

  /// Uniform in (0,1] from the first half of block `block`.
  double uniform(std::uint32_t block) const {
    const auto out = gen_({static_cast<std::uint32_t>(index_), static_cast<std::uint32_t>(index_ >> 32),
                           block, stream_});
    return to_unit(out[0], out[1]);
  }

 private:
  static double to_unit(std::uint32_t lo, std::uint32_t hi) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
    return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
  }

  const Philox4x32& gen_;
  std::uint64_t index_;
  std::uint32_t stream_;
};

}  // namespace qdisp
