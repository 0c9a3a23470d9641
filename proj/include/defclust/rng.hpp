#pragma once

// Counter-based random streams.
//
// Every stochastic routine in the library draws from a RandomStream that is
// addressed by (master seed, run, path, substream). The generator is
// Philox4x32-10: the key is the 64-bit master seed and the 128-bit counter is
// laid out as
//
//   word 0 : block index within the stream
//   word 1 : substream tag (names, factor, martingale, ...)
//   word 2 : path index
//   word 3 : run index
//
// Philox is a bijection of the counter for a fixed key, so distinct
// (run, path, substream, block) tuples never share a block. A path's draws
// depend only on its own address, which makes parallel results identical to
// serial ones regardless of scheduling.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>

namespace defclust {

struct StreamKey {
  std::uint64_t seed = 0;
  std::uint32_t run = 0;
  std::uint32_t path = 0;

  friend bool operator==(const StreamKey&, const StreamKey&) = default;
};

enum class Substream : std::uint32_t {
  names = 0,       // per-name Brownian increments
  thresholds = 1,  // exponential(1) default thresholds
  factor = 2,      // systematic factor increments dV
  martingale = 3,  // fluctuation martingale increments
  twist = 4,       // superimposed default clock of the intensity twist
  bernoulli = 5,   // independent-case default indicators
};

namespace philox {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline constexpr std::uint32_t kMul0 = 0xD2511F53u;
inline constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline constexpr Counter round(const Counter& c, const Key& k) noexcept {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const auto lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const auto lo1 = static_cast<std::uint32_t>(p1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

/// Philox4x32 with 10 rounds.
inline constexpr Counter block(Counter c, Key k) noexcept {
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    c = round(c, k);
  }
  return c;
}

/// Evaluates `Lanes` consecutive counters (word 0 = first, first+1, ...) with
/// the rounds interleaved across lanes; output is lane-major.
template <std::size_t Lanes>
inline void blocks(const Counter& first, const Key& key, std::uint32_t* out) noexcept {
  std::uint32_t c0[Lanes], c1[Lanes], c2[Lanes], c3[Lanes];
  for (std::size_t l = 0; l < Lanes; ++l) {
    c0[l] = first[0] + static_cast<std::uint32_t>(l);
    c1[l] = first[1];
    c2[l] = first[2];
    c3[l] = first[3];
  }
  std::uint32_t k0 = key[0], k1 = key[1];
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      k0 += kWeyl0;
      k1 += kWeyl1;
    }
    for (std::size_t l = 0; l < Lanes; ++l) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c0[l];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c2[l];
      const auto n0 = static_cast<std::uint32_t>(p1 >> 32) ^ c1[l] ^ k0;
      const auto n2 = static_cast<std::uint32_t>(p0 >> 32) ^ c3[l] ^ k1;
      c1[l] = static_cast<std::uint32_t>(p1);
      c3[l] = static_cast<std::uint32_t>(p0);
      c0[l] = n0;
      c2[l] = n2;
    }
  }
  for (std::size_t l = 0; l < Lanes; ++l) {
    out[4 * l + 0] = c0[l];
    out[4 * l + 1] = c1[l];
    out[4 * l + 2] = c2[l];
    out[4 * l + 3] = c3[l];
  }
}

}  // namespace philox

namespace detail {

inline constexpr double kZigR = 3.442619855899;

struct ZigguratTables {
  std::uint32_t k[128];
  double w[128];
  double f[128];
};

// Marsaglia-Tsang layer tables scaled for 25-bit signed abscissae.
inline ZigguratTables make_ziggurat_tables() {
  ZigguratTables t{};
  const double m = 16777216.0;  // 2^24
  const double vn = 9.91256303526217e-3;
  double dn = kZigR, tn = dn;
  const double q = vn / std::exp(-0.5 * dn * dn);
  t.k[0] = static_cast<std::uint32_t>((dn / q) * m);
  t.k[1] = 0;
  t.w[0] = q / m;
  t.w[127] = dn / m;
  t.f[0] = 1.0;
  t.f[127] = std::exp(-0.5 * dn * dn);
  for (int i = 126; i >= 1; --i) {
    dn = std::sqrt(-2.0 * std::log(vn / dn + std::exp(-0.5 * dn * dn)));
    t.k[i + 1] = static_cast<std::uint32_t>((dn / tn) * m);
    tn = dn;
    t.f[i] = std::exp(-0.5 * dn * dn);
    t.w[i] = dn / m;
  }
  return t;
}

inline const ZigguratTables& ziggurat_tables() {
  static const ZigguratTables tables = make_ziggurat_tables();
  return tables;
}

}  // namespace detail

class RandomStream {
 public:
  RandomStream(StreamKey key, Substream sub) noexcept
      : key_{static_cast<std::uint32_t>(key.seed),
             static_cast<std::uint32_t>(key.seed >> 32)},
        ctr_{0u, static_cast<std::uint32_t>(sub), key.path, key.run} {}

  std::uint32_t next_u32() noexcept {
    if (pos_ == kBuffer) refill();
    return buf_[pos_++];
  }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t hi = next_u32();
    const std::uint64_t lo = next_u32();
    return (hi << 32) | lo;
  }

  /// Uniform on the open interval (0, 1) with 53 bits of resolution.
  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double exponential() noexcept { return -std::log(uniform()); }

  /// Standard normal by a 128-layer ziggurat. The fast path consumes one
  /// 32-bit word: the low 7 bits pick the layer, the upper 25 bits form a
  /// signed abscissa.
  double normal() noexcept {
    const auto& z = detail::ziggurat_tables();
    for (;;) {
      const std::uint32_t w = next_u32();
      const std::size_t layer = w & 0x7Fu;
      const std::int32_t j = static_cast<std::int32_t>(w) >> 7;
      const double x = j * z.w[layer];
      if (static_cast<std::uint32_t>(j < 0 ? -j : j) < z.k[layer]) return x;
      if (layer == 0) {
        // tail beyond r
        double a, b;
        do {
          a = -std::log(uniform()) / detail::kZigR;
          b = -std::log(uniform());
        } while (b + b < a * a);
        return j > 0 ? detail::kZigR + a : -detail::kZigR - a;
      }
      if (z.f[layer] + uniform() * (z.f[layer - 1] - z.f[layer]) < std::exp(-0.5 * x * x)) return x;
    }
  }

  std::uint64_t blocks_consumed() const noexcept { return ctr_[0]; }

 private:
  static constexpr std::size_t kLanes = 8;
  static constexpr std::size_t kBuffer = 4 * kLanes;

  void refill() noexcept {
    philox::blocks<kLanes>(ctr_, key_, buf_.data());
    ctr_[0] += static_cast<std::uint32_t>(kLanes);
    pos_ = 0;
  }

  philox::Key key_;
  philox::Counter ctr_;
  std::array<std::uint32_t, kBuffer> buf_{};
  std::size_t pos_ = kBuffer;
};

}  // namespace defclust
