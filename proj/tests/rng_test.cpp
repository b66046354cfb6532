#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "uactn/rng.hpp"

namespace uactn {
namespace {

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 10000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64()) << "draw " << i;
  Rng c(42), d(42);
  for (int i = 0; i < 10000; ++i) ASSERT_EQ(c.normal(), d.normal()) << "draw " << i;
}

TEST(Rng, DifferentSeedsDiffer) {
  Rng a(1), b(2);
  EXPECT_NE(a.next_u64(), b.next_u64());
}

TEST(Rng, UniformFollowsDocumentedConstruction) {
  std::mt19937_64 ref(9);
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const double expected = static_cast<double>(ref() >> 11) / 9007199254740992.0;
    const double got = rng.uniform();
    ASSERT_EQ(got, expected);
    ASSERT_GE(got, 0.0);
    ASSERT_LT(got, 1.0);
  }
}

TEST(Rng, NormalMoments) {
  Rng rng(2024);
  const int n = 1000000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  const double mean = s / n;
  const double var = s2 / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 0.02);
  EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(Rng, IndexStaysInRangeAndCoversIt) {
  Rng rng(5);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const std::size_t k = rng.index(7);
    ASSERT_LT(k, 7u);
    ++counts[k];
  }
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
  EXPECT_THROW(rng.index(0), std::invalid_argument);
}

TEST(Rng, ShuffleIsAPermutation) {
  Rng rng(8);
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  rng.shuffle(w);
  EXPECT_NE(v, w);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(v, w);
}

}  // namespace
}  // namespace uactn
