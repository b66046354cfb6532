#include <gtest/gtest.h>

#include <sstream>

#include "uactn/experiment.hpp"
#include "uactn/rng.hpp"
#include "uactn/uncertainty.hpp"

namespace uactn {
namespace {

TEST(HarmonicMean, Examples) {
  const std::vector<double> constant = {0.25, 0.25, 0.25, 0.25};
  EXPECT_EQ(harmonic_mean(constant), 0.25);
  const std::vector<double> pair = {1.0, 1.0 / 3.0};
  EXPECT_NEAR(harmonic_mean(pair), 0.5, 1e-15);
}

TEST(HarmonicMean, RejectsNonPositiveAndEmpty) {
  const std::vector<double> zero = {1.0, 0.0};
  EXPECT_THROW(harmonic_mean(zero), std::domain_error);
  EXPECT_THROW(harmonic_mean(std::vector<double>{}), std::invalid_argument);
}

TEST(HarmonicMean, BoundedByArithmeticMeanAndExtremes) {
  Rng rng(61);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(1 + rng.index(20));
    for (double& x : v) x = std::exp(rng.uniform(-5, 5));
    double am = 0;
    for (double x : v) am += x;
    am /= static_cast<double>(v.size());
    const double hm = harmonic_mean(v);
    EXPECT_LE(hm, am * (1 + 1e-12));
    EXPECT_GE(hm, *std::min_element(v.begin(), v.end()) * (1 - 1e-12));
  }
}

TEST(Buckets, ThreeEvenlySpacedScores) {
  const std::vector<double> s = {1.0, 2.0, 3.0};
  const auto recs = normalize_and_bucket(s);
  EXPECT_EQ(recs[0].normalized, 0.0);
  EXPECT_EQ(recs[1].normalized, 0.5);
  EXPECT_EQ(recs[2].normalized, 1.0);
  EXPECT_EQ(recs[0].bucket, Bucket::low);
  EXPECT_EQ(recs[1].bucket, Bucket::mid);
  EXPECT_EQ(recs[2].bucket, Bucket::high);
}

TEST(Buckets, EdgesBelongToTheUpperBucket) {
  EXPECT_EQ(bucket_of(0.0), Bucket::low);
  EXPECT_EQ(bucket_of(1.0 / 3.0), Bucket::mid);
  EXPECT_EQ(bucket_of(2.0 / 3.0), Bucket::high);
  EXPECT_EQ(bucket_of(1.0), Bucket::high);
}

TEST(Buckets, AllEqualScoresAreRejected) {
  const std::vector<double> s = {0.7, 0.7, 0.7};
  EXPECT_THROW(normalize_and_bucket(s), std::domain_error);
  const std::vector<double> one = {0.7};
  EXPECT_THROW(normalize_and_bucket(one), std::invalid_argument);
}

TEST(Buckets, RandomScoresProperties) {
  Rng rng(67);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> s(2 + rng.index(50));
    for (double& x : s) x = std::exp(rng.uniform(-3, 3));
    if (*std::min_element(s.begin(), s.end()) == *std::max_element(s.begin(), s.end())) continue;
    const auto recs = normalize_and_bucket(s);
    const auto lo = std::min_element(s.begin(), s.end()) - s.begin();
    const auto hi = std::max_element(s.begin(), s.end()) - s.begin();
    EXPECT_EQ(recs[lo].normalized, 0.0);
    EXPECT_EQ(recs[lo].bucket, Bucket::low);
    EXPECT_EQ(recs[hi].normalized, 1.0);
    EXPECT_EQ(recs[hi].bucket, Bucket::high);
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (std::size_t j = 0; j < s.size(); ++j) {
        if (s[i] < s[j]) {
          EXPECT_LE(recs[i].normalized, recs[j].normalized);
          EXPECT_LE(static_cast<int>(recs[i].bucket), static_cast<int>(recs[j].bucket));
        }
      }
    }
    const BucketSummary sum = summarize_buckets(recs);
    EXPECT_EQ(sum.counts[0] + sum.counts[1] + sum.counts[2], s.size());
    EXPECT_NEAR(sum.percent[0] + sum.percent[1] + sum.percent[2], 100.0, 1e-9);
  }
}

TEST(Buckets, IdsAreCarried) {
  const std::vector<double> s = {3.0, 1.0};
  const std::vector<std::string> ids = {"a", "b"};
  const auto recs = normalize_and_bucket(s, ids);
  EXPECT_EQ(recs[0].id, "a");
  EXPECT_EQ(recs[1].id, "b");
  const std::vector<std::string> short_ids = {"a"};
  EXPECT_THROW(normalize_and_bucket(s, short_ids), std::invalid_argument);
}

// Pair counting over every (positive, negative) combination.
double auc_oracle(const std::vector<double>& s, const std::vector<char>& pos) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!pos[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (pos[j]) continue;
      pairs += 1;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

TEST(DetectionAuc, Examples) {
  const std::vector<double> s = {0.1, 0.2, 0.8, 0.9};
  EXPECT_EQ(detection_auc(s, std::vector<char>{0, 0, 1, 1}), 1.0);
  EXPECT_EQ(detection_auc(s, std::vector<char>{1, 1, 0, 0}), 0.0);
  const std::vector<double> tied = {0.5, 0.5};
  EXPECT_EQ(detection_auc(tied, std::vector<char>{1, 0}), 0.5);
  EXPECT_THROW(detection_auc(s, std::vector<char>{1, 1, 1, 1}), std::domain_error);
}

TEST(DetectionAuc, MatchesPairCounting) {
  Rng rng(71);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.index(40);
    std::vector<double> s(n);
    std::vector<char> pos(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.index(6));
      pos[i] = rng.uniform() < 0.4;
    }
    pos[0] = 1;
    pos[1] = 0;
    EXPECT_NEAR(detection_auc(s, pos), auc_oracle(s, pos), 1e-12);
  }
}

TEST(UncertaintyScores, HarmonicMeanOfExpLogvar) {
  GaussianEmbedding e{Matrix{{0, 0}, {1, 1}}, Matrix{{0, 0}, {std::log(1.0), std::log(1.0 / 3.0)}}};
  const auto s = uncertainty_scores(e);
  EXPECT_EQ(s[0], 1.0);
  EXPECT_NEAR(s[1], 0.5, 1e-15);
}

TEST(Report, Format) {
  const std::vector<double> s = {1.0, 2.0, 3.0, 3.0};
  const std::vector<std::string> ids = {"a", "b", "c", "d"};
  std::ostringstream os;
  write_uncertainty_report(os, normalize_and_bucket(s, ids));
  EXPECT_EQ(os.str(),
            "id,score,normalized,bucket\n"
            "a,1,0,low\nb,2,0.5,mid\nc,3,1,high\nd,3,1,high\n"
            "# low_percent=25\n# mid_percent=25\n# high_percent=50\n");
}

}  // namespace
}  // namespace uactn
