#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "defclust/rng.hpp"

using namespace defclust;

TEST(Philox, KnownAnswerVectors) {
  using philox::block;
  EXPECT_EQ(block({0, 0, 0, 0}, {0, 0}),
            (philox::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
            (philox::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (philox::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Philox, BatchedLanesMatchScalarBlocks) {
  const philox::Counter first{0xfffffffcu, 7, 11, 13};
  const philox::Key key{0x12345678u, 0x9abcdef0u};
  std::uint32_t out[32];
  philox::blocks<8>(first, key, out);
  for (std::uint32_t l = 0; l < 8; ++l) {
    const auto ref = philox::block({first[0] + l, first[1], first[2], first[3]}, key);
    for (int w = 0; w < 4; ++w) EXPECT_EQ(out[4 * l + w], ref[w]);
  }
}

TEST(RandomStream, SameAddressSameSequence) {
  RandomStream a({42, 1, 3}, Substream::names), b({42, 1, 3}, Substream::names);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u32(), b.next_u32());
}

TEST(RandomStream, DistinctAddressesDiffer) {
  const StreamKey base{42, 1, 3};
  RandomStream ref(base, Substream::names);
  std::vector<std::uint32_t> r(8);
  for (auto& v : r) v = ref.next_u32();
  for (auto key : {StreamKey{43, 1, 3}, StreamKey{42, 2, 3}, StreamKey{42, 1, 4}}) {
    RandomStream s(key, Substream::names);
    int same = 0;
    for (auto v : r) same += s.next_u32() == v;
    EXPECT_LT(same, 2);
  }
  RandomStream other(base, Substream::factor);
  int same = 0;
  for (auto v : r) same += other.next_u32() == v;
  EXPECT_LT(same, 2);
}

TEST(RandomStream, UniformOpenInterval) {
  RandomStream s({1, 0, 0}, Substream::names);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(RandomStream, NormalMoments) {
  RandomStream s({2024, 0, 0}, Substream::names);
  const int n = 1000000;
  double m1 = 0, m2 = 0, m4 = 0;
  int tail = 0;
  for (int i = 0; i < n; ++i) {
    const double z = s.normal();
    m1 += z;
    m2 += z * z;
    m4 += z * z * z * z;
    tail += std::abs(z) > 3.0;
  }
  m1 /= n;
  m2 /= n;
  m4 /= n;
  EXPECT_NEAR(m1, 0.0, 5e-3);
  EXPECT_NEAR(m2, 1.0, 5e-3);
  EXPECT_NEAR(m4, 3.0, 0.03);
  // P(|Z| > 3) = 0.0026998
  EXPECT_NEAR(static_cast<double>(tail) / n, 0.0026998, 4.0 * std::sqrt(0.0027 / n));
}

TEST(RandomStream, ExponentialMean) {
  RandomStream s({5, 0, 0}, Substream::thresholds);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) sum += s.exponential();
  EXPECT_NEAR(sum / n, 1.0, 4.0 / std::sqrt(n));
}
