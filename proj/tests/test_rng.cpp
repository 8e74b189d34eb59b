#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <numeric>
#include <set>

#include "turnover/rng.hpp"

using namespace turnover;

namespace {

// 99 degrees of freedom, upper 0.001 tail.
constexpr double kChiSquare99At001 = 148.23;

double chi_square_uniform(const std::vector<double>& u, std::size_t bins) {
  std::vector<double> counts(bins, 0.0);
  for (double x : u) counts[static_cast<std::size_t>(x * static_cast<double>(bins))] += 1.0;
  const double expected = static_cast<double>(u.size()) / static_cast<double>(bins);
  double chi = 0.0;
  for (double c : counts) chi += (c - expected) * (c - expected) / expected;
  return chi;
}

}  // namespace

TEST(Philox, KnownAnswerZero) {
  const auto out = philox4x32({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out, (std::array<std::uint32_t, 4>{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, KnownAnswerAllOnes) {
  const auto out = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                              {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out, (std::array<std::uint32_t, 4>{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, KnownAnswerPiDigits) {
  const auto out = philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                              {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out, (std::array<std::uint32_t, 4>{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(UniformBlock, SameInputsAreByteIdentical) {
  const RngKey key{42, 7};
  const auto a = uniform_block(key, 3, 1000);
  const auto b = uniform_block(key, 3, 1000);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)), 0);
}

TEST(UniformBlock, DistinctStreamsDiffer) {
  const auto a = uniform_block(RngKey{1, 0}, 0, 1000);
  const auto b = uniform_block(RngKey{1, 1}, 0, 1000);
  std::size_t differ = 0;
  for (std::size_t i = 0; i < a.size(); ++i) differ += a[i] != b[i];
  EXPECT_GT(differ, 900u);
}

TEST(UniformBlock, MeanOfAMillionDraws) {
  const auto u = uniform_block(RngKey{5, 9}, 0, 1'000'000);
  const double mean = std::accumulate(u.begin(), u.end(), 0.0) / static_cast<double>(u.size());
  EXPECT_GE(mean, 0.497);
  EXPECT_LE(mean, 0.503);
}

TEST(UniformBlock, RangeIsHalfOpenUnitInterval) {
  const auto u = uniform_block(RngKey{3, 3}, 0, 100'000);
  for (double x : u) {
    ASSERT_GE(x, 0.0);
    ASSERT_LT(x, 1.0);
  }
}

TEST(UniformBlock, RandomAccessMatchesSequentialSuffix) {
  const RngKey key{77, 123};
  const auto whole = uniform_block(key, 10, 200);
  for (std::uint64_t skip : {1u, 5u, 37u, 99u}) {
    const auto part = uniform_block(key, 10 + skip, 200 - 2 * skip);
    for (std::size_t i = 0; i < part.size(); ++i) {
      ASSERT_EQ(part[i], whole[2 * skip + i]) << "skip " << skip << " index " << i;
    }
  }
}

TEST(UniformBlock, ChiSquareUniformityAcrossStreams) {
  for (std::uint64_t stream = 0; stream < 8; ++stream) {
    const auto u = uniform_block(RngKey{2024, stream}, 0, 100'000);
    EXPECT_LT(chi_square_uniform(u, 100), kChiSquare99At001) << "stream " << stream;
  }
}

TEST(UniformBlock, ReproducibleForRandomKeys) {
  for (std::uint64_t i = 0; i < 100; ++i) {
    const RngKey key{mix64(i), mix64(i + 1000)};
    const std::uint64_t counter = mix64(i + 2000) >> 8;
    EXPECT_EQ(uniform_block(key, counter, 17), uniform_block(key, counter, 17));
  }
}

TEST(Streams, MaskStreamsNeverCollideWithTaggedStreams) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t id : {std::uint64_t{0}, std::uint64_t{1}, streams::kMaxInstanceId}) {
    for (std::size_t layer : {std::size_t{0}, std::size_t{1}, streams::kMaxMaskedLayers - 1}) {
      const auto s = streams::mask(id, layer);
      EXPECT_EQ(s & streams::kTagged, 0u);
      EXPECT_TRUE(seen.insert(s).second);
    }
  }
}

TEST(CounterRng, BelowIsInRangeAndCoversValues) {
  CounterRng rng(9, streams::kShuffle);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto v = rng.below(7);
    ASSERT_LT(v, 7u);
    ++counts[v];
  }
  for (int c : counts) EXPECT_NEAR(c, 1000, 150);
}

TEST(CounterRng, NormalMomentsAreStandard) {
  CounterRng rng(10, streams::kSynthetic);
  const int n = 200'000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(sq / n - mean * mean, 1.0, 0.02);
}

TEST(CounterRng, ShuffleIsAPermutation) {
  CounterRng rng(11, streams::kShuffle);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  rng.shuffle(w);
  EXPECT_NE(v, w);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(v, w);
}

TEST(WideMultiply, MatchesKnownProducts) {
  const auto a = wide_multiply(0xffffffffffffffffULL, 0xffffffffffffffffULL);
  EXPECT_EQ(a.hi, 0xfffffffffffffffeULL);
  EXPECT_EQ(a.lo, 1u);
  const auto b = wide_multiply(std::uint64_t{1} << 40, std::uint64_t{1} << 40);
  EXPECT_EQ(b.hi, std::uint64_t{1} << 16);
  EXPECT_EQ(b.lo, 0u);
  const auto c = wide_multiply(123456789, 987654321);
  EXPECT_EQ(c.hi, 0u);
  EXPECT_EQ(c.lo, 123456789ULL * 987654321ULL);
}
