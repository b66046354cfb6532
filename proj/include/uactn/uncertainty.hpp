#ifndef UACTN_UNCERTAINTY_HPP
#define UACTN_UNCERTAINTY_HPP

// Scalar uncertainty per sketch (harmonic mean of the predicted σ²),
// min-max normalisation, and three equal-width buckets.

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "uactn/text_io.hpp"

namespace uactn {

/// D / Σ 1/σ²_d.
inline double harmonic_mean(std::span<const double> sigma2) {
  if (sigma2.empty()) throw std::invalid_argument("harmonic_mean: empty vector");
  double inv = 0.0;
  for (std::size_t d = 0; d < sigma2.size(); ++d) {
    if (!(sigma2[d] > 0.0)) {
      throw std::domain_error("harmonic_mean: entry " + std::to_string(d) +
                              " is not positive");
    }
    inv += 1.0 / sigma2[d];
  }
  return static_cast<double>(sigma2.size()) / inv;
}

enum class Bucket { low, mid, high };

inline const char* to_string(Bucket b) {
  switch (b) {
    case Bucket::low: return "low";
    case Bucket::mid: return "mid";
    case Bucket::high: return "high";
  }
  return "?";
}

struct UncertaintyRecord {
  std::string id;
  double score = 0.0;
  double normalized = 0.0;
  Bucket bucket = Bucket::low;
};

struct BucketSummary {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> percent{};
};

/// Upper edges of the low and mid buckets on the normalised scale.
struct BucketEdges {
  double low_mid = 1.0 / 3.0;
  double mid_high = 2.0 / 3.0;
};

inline Bucket bucket_of(double normalized, const BucketEdges& edges = {}) {
  if (normalized < edges.low_mid) return Bucket::low;
  if (normalized < edges.mid_high) return Bucket::mid;
  return Bucket::high;
}

/// Min-max normalises scores to [0, 1] and bins them into
/// [0, ⅓), [⅓, ⅔), [⅔, 1]. `ids` may be empty (ids left blank).
inline std::vector<UncertaintyRecord> normalize_and_bucket(std::span<const double> scores,
                                                           std::span<const std::string> ids = {},
                                                           const BucketEdges& edges = {}) {
  if (!ids.empty() && ids.size() != scores.size()) {
    throw std::invalid_argument("normalize_and_bucket: id count does not match scores");
  }
  if (scores.size() < 2) throw std::invalid_argument("normalize_and_bucket: need at least 2 scores");
  const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) {
    throw std::domain_error("normalize_and_bucket: all scores equal, normalisation undefined");
  }
  std::vector<UncertaintyRecord> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    auto& r = out[i];
    if (!ids.empty()) r.id = ids[i];
    r.score = scores[i];
    r.normalized = std::clamp((scores[i] - lo) / (hi - lo), 0.0, 1.0);
    r.bucket = bucket_of(r.normalized, edges);
  }
  return out;
}

inline BucketSummary summarize_buckets(const std::vector<UncertaintyRecord>& recs) {
  BucketSummary s;
  for (const auto& r : recs) ++s.counts[static_cast<std::size_t>(r.bucket)];
  if (!recs.empty()) {
    for (std::size_t b = 0; b < 3; ++b) {
      s.percent[b] = 100.0 * static_cast<double>(s.counts[b]) / static_cast<double>(recs.size());
    }
  }
  return s;
}

/// Area under the ROC curve of `scores` as a detector of `positive`,
/// ties counted as one half (Mann–Whitney statistic).
inline double detection_auc(std::span<const double> scores, std::span<const char> positive) {
  if (scores.size() != positive.size()) throw std::invalid_argument("detection_auc: size mismatch");
  std::vector<std::size_t> idx(scores.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Average ranks over tie groups.
  std::vector<double> ranks(scores.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
    i = j + 1;
  }
  double pos = 0, rank_sum = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (positive[i]) {
      pos += 1;
      rank_sum += ranks[i];
    }
  }
  const double neg = static_cast<double>(scores.size()) - pos;
  if (pos == 0 || neg == 0) throw std::domain_error("detection_auc: need both classes");
  return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

/// CSV `id,score,normalized,bucket` followed by a `#`-prefixed summary.
inline void write_uncertainty_report(std::ostream& out, const std::vector<UncertaintyRecord>& recs) {
  out << "id,score,normalized,bucket\n";
  for (const auto& r : recs) {
    out << r.id << ',' << format_double(r.score) << ',' << format_double(r.normalized) << ','
        << to_string(r.bucket) << '\n';
  }
  const BucketSummary s = summarize_buckets(recs);
  out << "# low_percent=" << format_double(s.percent[0]) << '\n'
      << "# mid_percent=" << format_double(s.percent[1]) << '\n'
      << "# high_percent=" << format_double(s.percent[2]) << '\n';
}

}  // namespace uactn

#endif  // UACTN_UNCERTAINTY_HPP
