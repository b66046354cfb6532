#ifndef UACTN_METRICS_HPP
#define UACTN_METRICS_HPP

// Cosine ranking of a gallery per query and the standard SHREC retrieval
// metrics: NN, FT, ST, E-measure (cutoff 32), normalised DCG, mAP, and the
// 11-point interpolated precision-recall curve.
//
// Conventions, with R the number of gallery items sharing the query label
// and G the gallery size:
//   NN  = rel(1)
//   FT  = hits in top R / R
//   ST  = hits in top min(2R, G) / R
//   E   = 2PR/(P+R) at K = min(32, G), P = hits@K / K, R = hits@K / R
//   DCG = (rel(1) + Σ_{i≥2} rel(i)/log2 i) / ideal, ideal = all R first
//   AP  = (1/R) Σ_{k: rel(k)} hits@k / k
// Queries with R = 0 are left out of every average and listed separately.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "uactn/numeric.hpp"
#include "uactn/text_io.hpp"

namespace uactn {

struct RankedList {
  std::size_t query = 0;
  std::vector<std::size_t> order;  // gallery indices, best first
  std::vector<char> relevant;      // relevant[k] for the item at rank k+1

  std::size_t relevant_count() const {
    return static_cast<std::size_t>(std::count(relevant.begin(), relevant.end(), 1));
  }
};

/// Descending cosine; equal similarities keep ascending gallery index.
inline std::vector<RankedList> rank(const Matrix& queries, const Matrix& gallery,
                                    std::span<const std::size_t> qlabels,
                                    std::span<const std::size_t> glabels) {
  if (gallery.rows() == 0) throw std::invalid_argument("rank: empty gallery");
  if (queries.cols() != gallery.cols()) {
    throw std::invalid_argument("rank: query dim " + std::to_string(queries.cols()) +
                                " vs gallery dim " + std::to_string(gallery.cols()));
  }
  if (qlabels.size() != queries.rows() || glabels.size() != gallery.rows()) {
    throw std::invalid_argument("rank: label count does not match embeddings");
  }
  const Matrix sim = cosine_matrix(queries, gallery);
  std::vector<RankedList> out(queries.rows());
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    RankedList& r = out[q];
    r.query = q;
    r.order.resize(gallery.rows());
    std::iota(r.order.begin(), r.order.end(), std::size_t{0});
    auto s = sim.row(q);
    std::stable_sort(r.order.begin(), r.order.end(),
                     [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
    r.relevant.resize(r.order.size());
    for (std::size_t k = 0; k < r.order.size(); ++k) {
      r.relevant[k] = glabels[r.order[k]] == qlabels[q] ? 1 : 0;
    }
  }
  return out;
}

namespace detail {

inline std::size_t require_relevant(const RankedList& r, const char* op) {
  const std::size_t n = r.relevant_count();
  if (n == 0) {
    throw std::domain_error(std::string(op) + ": query " + std::to_string(r.query) +
                            " has no relevant gallery item");
  }
  return n;
}

inline std::size_t hits_at(const RankedList& r, std::size_t k) {
  k = std::min(k, r.relevant.size());
  return static_cast<std::size_t>(
      std::count(r.relevant.begin(), r.relevant.begin() + static_cast<std::ptrdiff_t>(k), 1));
}

}  // namespace detail

inline double average_precision(const RankedList& r) {
  const std::size_t total = detail::require_relevant(r, "average_precision");
  // Extended-precision accumulation so short hand-checkable lists round to
  // the nearest double (AP of {1,0,1,0} is exactly 5/6).
  long double acc = 0.0L;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < r.relevant.size(); ++k) {
    if (r.relevant[k]) {
      ++hits;
      acc += static_cast<long double>(hits) / static_cast<long double>(k + 1);
    }
  }
  return static_cast<double>(acc / static_cast<long double>(total));
}

struct TierMetrics {
  double nn = 0.0;
  double ft = 0.0;
  double st = 0.0;
};

inline TierMetrics tier_metrics(const RankedList& r) {
  const std::size_t total = detail::require_relevant(r, "tier_metrics");
  const double denom = static_cast<double>(total);
  return {r.relevant[0] ? 1.0 : 0.0,
          static_cast<double>(detail::hits_at(r, total)) / denom,
          static_cast<double>(detail::hits_at(r, 2 * total)) / denom};
}

inline constexpr std::size_t kEMeasureCutoff = 32;

inline double e_measure(const RankedList& r, std::size_t cutoff = kEMeasureCutoff) {
  const std::size_t total = detail::require_relevant(r, "e_measure");
  const std::size_t k = std::min(cutoff, r.relevant.size());
  const double hits = static_cast<double>(detail::hits_at(r, k));
  const double p = hits / static_cast<double>(k);
  const double rc = hits / static_cast<double>(total);
  return p + rc == 0.0 ? 0.0 : 2.0 * p * rc / (p + rc);
}

inline double dcg(const RankedList& r) {
  const std::size_t total = detail::require_relevant(r, "dcg");
  auto gain = [](std::size_t rank1) {
    return rank1 == 1 ? 1.0 : 1.0 / std::log2(static_cast<double>(rank1));
  };
  double actual = 0.0;
  for (std::size_t k = 0; k < r.relevant.size(); ++k) {
    if (r.relevant[k]) actual += gain(k + 1);
  }
  double ideal = 0.0;
  for (std::size_t k = 0; k < total; ++k) ideal += gain(k + 1);
  return actual / ideal;
}

inline constexpr std::size_t kPrPoints = 11;
using PrCurve = std::array<double, kPrPoints>;

/// Interpolated precision at recall 0.0, 0.1, …, 1.0: the best precision
/// at any rank whose recall reaches the level.
inline PrCurve pr_curve(const RankedList& r) {
  const std::size_t total = detail::require_relevant(r, "pr_curve");
  PrCurve out{};
  std::size_t hits = 0;
  for (std::size_t k = 0; k < r.relevant.size(); ++k) {
    if (!r.relevant[k]) continue;
    ++hits;
    const double precision = static_cast<double>(hits) / static_cast<double>(k + 1);
    const double recall = static_cast<double>(hits) / static_cast<double>(total);
    for (std::size_t l = 0; l < kPrPoints; ++l) {
      const double level = static_cast<double>(l) / 10.0;
      if (recall + 1e-12 >= level) out[l] = std::max(out[l], precision);
    }
  }
  return out;
}

struct QueryMetrics {
  std::size_t query = 0;
  std::size_t relevant = 0;
  double nn = 0.0, ft = 0.0, st = 0.0, e = 0.0, dcg = 0.0, ap = 0.0;
  PrCurve pr{};
};

inline QueryMetrics query_metrics(const RankedList& r) {
  QueryMetrics m;
  m.query = r.query;
  m.relevant = r.relevant_count();
  const TierMetrics t = tier_metrics(r);
  m.nn = t.nn;
  m.ft = t.ft;
  m.st = t.st;
  m.e = e_measure(r);
  m.dcg = dcg(r);
  m.ap = average_precision(r);
  m.pr = pr_curve(r);
  return m;
}

struct MetricReport {
  double nn = 0.0, ft = 0.0, st = 0.0, e = 0.0, dcg = 0.0, map = 0.0;
  std::vector<QueryMetrics> per_query;  // scored queries, in query order
  std::vector<std::size_t> excluded;    // queries with no relevant item
  PrCurve pr{};

  bool operator==(const MetricReport& o) const {
    auto same = [](const QueryMetrics& a, const QueryMetrics& b) {
      return a.query == b.query && a.relevant == b.relevant && a.nn == b.nn && a.ft == b.ft &&
             a.st == b.st && a.e == b.e && a.dcg == b.dcg && a.ap == b.ap && a.pr == b.pr;
    };
    return nn == o.nn && ft == o.ft && st == o.st && e == o.e && dcg == o.dcg && map == o.map &&
           excluded == o.excluded && pr == o.pr && per_query.size() == o.per_query.size() &&
           std::equal(per_query.begin(), per_query.end(), o.per_query.begin(), same);
  }
};

/// Averages per-query metrics over the ranked lists (fixed query order).
inline MetricReport summarize(const std::vector<RankedList>& lists) {
  MetricReport rep;
  for (const auto& r : lists) {
    if (r.relevant_count() == 0) {
      rep.excluded.push_back(r.query);
      continue;
    }
    rep.per_query.push_back(query_metrics(r));
  }
  if (rep.per_query.empty()) {
    throw std::domain_error("evaluate: no query has a relevant gallery item");
  }
  for (const auto& q : rep.per_query) {
    rep.nn += q.nn;
    rep.ft += q.ft;
    rep.st += q.st;
    rep.e += q.e;
    rep.dcg += q.dcg;
    rep.map += q.ap;
    for (std::size_t l = 0; l < kPrPoints; ++l) rep.pr[l] += q.pr[l];
  }
  const double n = static_cast<double>(rep.per_query.size());
  rep.nn /= n;
  rep.ft /= n;
  rep.st /= n;
  rep.e /= n;
  rep.dcg /= n;
  rep.map /= n;
  for (double& p : rep.pr) p /= n;
  return rep;
}

inline MetricReport evaluate(const Matrix& queries, const Matrix& gallery,
                             std::span<const std::size_t> qlabels,
                             std::span<const std::size_t> glabels) {
  return summarize(rank(queries, gallery, qlabels, glabels));
}

// ---------------------------------------------------------------------------
// Report files

inline void write_metrics(std::ostream& out, const MetricReport& r) {
  out << "nn=" << format_double(r.nn) << '\n'
      << "ft=" << format_double(r.ft) << '\n'
      << "st=" << format_double(r.st) << '\n'
      << "e=" << format_double(r.e) << '\n'
      << "dcg=" << format_double(r.dcg) << '\n'
      << "map=" << format_double(r.map) << '\n'
      << "queries=" << r.per_query.size() << '\n'
      << "excluded=" << r.excluded.size() << '\n';
}

/// `query_ids[i]` names query i; the CSV has one row per scored query.
inline void write_per_query(std::ostream& out, const MetricReport& r,
                            const std::vector<std::string>& query_ids) {
  out << "id,relevant,nn,ft,st,e,dcg,ap\n";
  for (const auto& q : r.per_query) {
    out << query_ids.at(q.query) << ',' << q.relevant << ',' << format_double(q.nn) << ','
        << format_double(q.ft) << ',' << format_double(q.st) << ',' << format_double(q.e) << ','
        << format_double(q.dcg) << ',' << format_double(q.ap) << '\n';
  }
}

inline void write_pr_curve(std::ostream& out, const PrCurve& pr) {
  for (std::size_t l = 0; l < kPrPoints; ++l) {
    out << format_double(static_cast<double>(l) / 10.0) << ' ' << format_double(pr[l]) << '\n';
  }
}

}  // namespace uactn

#endif  // UACTN_METRICS_HPP
