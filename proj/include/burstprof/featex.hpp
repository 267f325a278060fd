#pragma once

// Per-domain aggregated measurements.
//
// Record level, over R(i) = records of domain i pooled across users:
//   t_r_l_k  leading gap quantile   t_r_n_k  next gap quantile
//   s_r_u_k  upload size quantile   s_r_d_k  download size quantile
// Burst level, over B(i) = bursts containing domain i:
//   o_b_j    P(domain ranks j-th by first appearance), j = 1..9
//   u_b_j    P(burst has j unique domains), j = 1..9
//   obar_b_1 = o_b_1 - u_b_1
//   d_b_k, t_b_l_k, t_b_n_k, s_b_u_k, s_b_d_k  duration, gap and size quantiles
// Quantiles use k = 5, 10, ..., 95 with linear interpolation at rank (n-1)k/100.
// A quantile over an empty sample is NaN (missing).

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "burstprof/burstseg.hpp"
#include "burstprof/csv.hpp"
#include "burstprof/error.hpp"
#include "burstprof/trace.hpp"

namespace burstprof {

inline constexpr std::size_t kQuantileCount = 19;
inline constexpr std::size_t kMaxRank = 9;

inline constexpr std::array<int, kQuantileCount> quantile_levels() {
  std::array<int, kQuantileCount> k{};
  for (std::size_t i = 0; i < kQuantileCount; ++i) k[i] = 5 * static_cast<int>(i + 1);
  return k;
}

// Linear-interpolation quantile on an already sorted sample.
inline double sorted_quantile(std::span<const double> sorted, double k) {
  if (sorted.empty()) throw InsufficientDataError(0, 1);
  if (!(k >= 0 && k <= 100)) throw ConfigError("quantile level must lie in [0,100]");
  const double pos = static_cast<double>(sorted.size() - 1) * k / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::span<const double> samples, double k) {
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  return sorted_quantile(s, k);
}

using QuantileVector = std::array<double, kQuantileCount>;

inline QuantileVector quantile_vector(std::vector<double> samples) {
  QuantileVector q;
  if (samples.empty()) {
    q.fill(std::numeric_limits<double>::quiet_NaN());
    return q;
  }
  std::sort(samples.begin(), samples.end());
  const auto levels = quantile_levels();
  for (std::size_t i = 0; i < kQuantileCount; ++i) q[i] = sorted_quantile(samples, levels[i]);
  return q;
}

enum class SizeUnit { Bytes, Kilobytes };

inline double size_in(SizeUnit unit, std::uint64_t bytes) {
  return unit == SizeUnit::Kilobytes ? static_cast<double>(bytes) / 1000.0 : static_cast<double>(bytes);
}

struct RecordFeatures {
  QuantileVector leading_gap;  // t_r_l_k
  QuantileVector next_gap;     // t_r_n_k
  QuantileVector upload;       // s_r_u_k
  QuantileVector download;     // s_r_d_k
};

struct BurstFeatures {
  std::array<double, kMaxRank> rank{};    // o_b_j
  std::array<double, kMaxRank> unique{};  // u_b_j
  QuantileVector duration;                // d_b_k
  QuantileVector leading_gap;             // t_b_l_k
  QuantileVector next_gap;                // t_b_n_k
  QuantileVector upload;                  // s_b_u_k
  QuantileVector download;                // s_b_d_k

  double obar1() const { return rank[0] - unique[0]; }
};

struct DomainFeatures {
  std::string domain;
  RecordFeatures record;
  BurstFeatures burst;
  std::size_t n_records = 0;
  std::size_t n_bursts = 0;
};

// Column names in output order; values() follows the same order.
inline const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (std::size_t j = 1; j <= kMaxRank; ++j) n.push_back("o_b_" + std::to_string(j));
    for (std::size_t j = 1; j <= kMaxRank; ++j) n.push_back("u_b_" + std::to_string(j));
    n.push_back("obar_b_1");
    const auto levels = quantile_levels();
    for (const char* fam : {"d_b", "t_b_l", "t_b_n", "s_b_u", "s_b_d", "t_r_l", "t_r_n", "s_r_u", "s_r_d"})
      for (int k : levels) n.push_back(std::string(fam) + "_" + std::to_string(k));
    return n;
  }();
  return names;
}

inline bool is_record_feature(std::string_view name) { return name.starts_with("t_r_") || name.starts_with("s_r_"); }

inline std::vector<double> feature_values(const DomainFeatures& f) {
  std::vector<double> v;
  v.reserve(feature_names().size());
  v.insert(v.end(), f.burst.rank.begin(), f.burst.rank.end());
  v.insert(v.end(), f.burst.unique.begin(), f.burst.unique.end());
  v.push_back(f.burst.obar1());
  for (const auto* q : {&f.burst.duration, &f.burst.leading_gap, &f.burst.next_gap, &f.burst.upload,
                        &f.burst.download, &f.record.leading_gap, &f.record.next_gap, &f.record.upload,
                        &f.record.download})
    v.insert(v.end(), q->begin(), q->end());
  return v;
}

// Value of one named feature (including n_records / n_bursts).
inline double feature_value(const DomainFeatures& f, std::string_view name) {
  if (name == "n_records") return static_cast<double>(f.n_records);
  if (name == "n_bursts") return static_cast<double>(f.n_bursts);
  const auto& names = feature_names();
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ConfigError("unknown feature '" + std::string(name) + "'");
  return feature_values(f)[static_cast<std::size_t>(it - names.begin())];
}

// Raw per-domain samples. Accumulators for disjoint user sets merge by
// concatenation, so pooled quantiles do not depend on merge order.
class FeatureAccumulator {
 public:
  explicit FeatureAccumulator(SizeUnit unit = SizeUnit::Kilobytes) : unit_(unit) {}

  void add_user(const UserTrace& trace, std::span<const Burst> bursts) {
    const auto& recs = trace.records();
    for (std::size_t i = 0; i < recs.size(); ++i) {
      auto& s = domains_[recs[i].domain];
      ++s.n_records;
      if (i > 0) s.rec_lead.push_back(recs[i].timestamp - recs[i - 1].timestamp);
      if (i + 1 < recs.size()) s.rec_next.push_back(recs[i + 1].timestamp - recs[i].timestamp);
      s.rec_up.push_back(size_in(unit_, recs[i].upload_size));
      s.rec_down.push_back(size_in(unit_, recs[i].download_size));
    }
    for (std::size_t b = 0; b < bursts.size(); ++b) {
      const auto& burst = bursts[b];
      const std::size_t unique = burst.unique_domains.size();
      for (std::size_t r = 0; r < unique; ++r) {
        auto& s = domains_[burst.unique_domains[r]];
        ++s.n_bursts;
        if (r < kMaxRank) ++s.rank_counts[r];
        if (unique <= kMaxRank) ++s.unique_counts[unique - 1];
        s.b_duration.push_back(burst.duration());
        if (b > 0) s.b_lead.push_back(burst.start - bursts[b - 1].end);
        if (b + 1 < bursts.size()) s.b_next.push_back(bursts[b + 1].start - burst.end);
        s.b_up.push_back(size_in(unit_, burst.upload));
        s.b_down.push_back(size_in(unit_, burst.download));
      }
    }
  }

  void merge(const FeatureAccumulator& other) {
    if (other.unit_ != unit_) throw ConfigError("cannot merge accumulators with different size units");
    for (const auto& [d, o] : other.domains_) {
      auto& s = domains_[d];
      s.n_records += o.n_records;
      s.n_bursts += o.n_bursts;
      for (std::size_t j = 0; j < kMaxRank; ++j) {
        s.rank_counts[j] += o.rank_counts[j];
        s.unique_counts[j] += o.unique_counts[j];
      }
      auto append = [](std::vector<double>& a, const std::vector<double>& b) { a.insert(a.end(), b.begin(), b.end()); };
      append(s.rec_lead, o.rec_lead);
      append(s.rec_next, o.rec_next);
      append(s.rec_up, o.rec_up);
      append(s.rec_down, o.rec_down);
      append(s.b_duration, o.b_duration);
      append(s.b_lead, o.b_lead);
      append(s.b_next, o.b_next);
      append(s.b_up, o.b_up);
      append(s.b_down, o.b_down);
    }
  }

  bool contains(const std::string& domain) const { return domains_.count(domain) != 0; }

  RecordFeatures record_features(const std::string& domain) const {
    const auto& s = lookup(domain);
    if (s.n_records == 0) throw ConfigError("domain '" + domain + "' has no records");
    return {quantile_vector(s.rec_lead), quantile_vector(s.rec_next), quantile_vector(s.rec_up),
            quantile_vector(s.rec_down)};
  }

  BurstFeatures burst_features(const std::string& domain) const {
    const auto& s = lookup(domain);
    if (s.n_bursts == 0) throw ConfigError("domain '" + domain + "' appears in no burst");
    BurstFeatures f;
    const auto nb = static_cast<double>(s.n_bursts);
    for (std::size_t j = 0; j < kMaxRank; ++j) {
      f.rank[j] = static_cast<double>(s.rank_counts[j]) / nb;
      f.unique[j] = static_cast<double>(s.unique_counts[j]) / nb;
    }
    f.duration = quantile_vector(s.b_duration);
    f.leading_gap = quantile_vector(s.b_lead);
    f.next_gap = quantile_vector(s.b_next);
    f.upload = quantile_vector(s.b_up);
    f.download = quantile_vector(s.b_down);
    return f;
  }

  // One entry per domain seen in a burst, ordered by domain name.
  std::vector<DomainFeatures> finalize() const {
    std::vector<DomainFeatures> out;
    out.reserve(domains_.size());
    for (const auto& [d, s] : domains_) {
      if (s.n_records == 0 || s.n_bursts == 0) continue;
      DomainFeatures f;
      f.domain = d;
      f.record = record_features(d);
      f.burst = burst_features(d);
      f.n_records = s.n_records;
      f.n_bursts = s.n_bursts;
      out.push_back(std::move(f));
    }
    return out;
  }

 private:
  struct Samples {
    std::size_t n_records = 0, n_bursts = 0;
    std::array<std::size_t, kMaxRank> rank_counts{}, unique_counts{};
    std::vector<double> rec_lead, rec_next, rec_up, rec_down;
    std::vector<double> b_duration, b_lead, b_next, b_up, b_down;
  };

  const Samples& lookup(const std::string& domain) const {
    auto it = domains_.find(domain);
    if (it == domains_.end()) throw ConfigError("unseen domain '" + domain + "'");
    return it->second;
  }

  SizeUnit unit_;
  std::map<std::string, Samples> domains_;
};

// Convenience wrappers over a batch of traces and their bursts.
inline FeatureAccumulator accumulate(std::span<const UserTrace> traces,
                                     std::span<const std::vector<Burst>> bursts,
                                     SizeUnit unit = SizeUnit::Kilobytes) {
  if (traces.size() != bursts.size()) throw ConfigError("traces and bursts differ in length");
  FeatureAccumulator acc(unit);
  for (std::size_t u = 0; u < traces.size(); ++u) acc.add_user(traces[u], bursts[u]);
  return acc;
}

inline RecordFeatures record_features(std::span<const UserTrace> traces, const std::string& domain,
                                      SizeUnit unit = SizeUnit::Kilobytes) {
  FeatureAccumulator acc(unit);
  for (const auto& t : traces) acc.add_user(t, {});
  return acc.record_features(domain);
}

inline BurstFeatures burst_features(std::span<const UserTrace> traces, std::span<const std::vector<Burst>> bursts,
                                    const std::string& domain, SizeUnit unit = SizeUnit::Kilobytes) {
  return accumulate(traces, bursts, unit).burst_features(domain);
}

inline void write_feature_matrix(std::span<const DomainFeatures> rows, std::ostream& out) {
  out << "domain";
  for (const auto& n : feature_names()) out << ',' << n;
  out << ",n_records,n_bursts\n";
  for (const auto& f : rows) {
    out << csv::quote(f.domain);
    for (double v : feature_values(f)) out << ',' << csv::format_double(v);
    out << ',' << f.n_records << ',' << f.n_bursts << '\n';
  }
}

// Feature matrix as written by write_feature_matrix: one named row per domain.
struct FeatureTable {
  std::vector<std::string> columns;  // feature names after "domain"
  std::vector<std::string> domains;
  std::vector<std::vector<double>> rows;

  std::size_t column(std::string_view name) const {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw ConfigError("feature table has no column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - columns.begin());
  }
};

inline FeatureTable to_table(std::span<const DomainFeatures> rows) {
  FeatureTable t;
  t.columns = feature_names();
  t.columns.push_back("n_records");
  t.columns.push_back("n_bursts");
  for (const auto& f : rows) {
    t.domains.push_back(f.domain);
    auto v = feature_values(f);
    v.push_back(static_cast<double>(f.n_records));
    v.push_back(static_cast<double>(f.n_bursts));
    t.rows.push_back(std::move(v));
  }
  return t;
}

inline FeatureTable read_feature_table(std::istream& in, const std::string& name = "<features>") {
  FeatureTable t;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(name, "missing header");
  auto header = csv::split(line);
  if (!header || header->empty() || (*header)[0] != "domain") throw ParseError(name, "bad header", 1);
  t.columns.assign(header->begin() + 1, header->end());
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = csv::split(line);
    if (!fields || fields->size() != header->size()) throw ParseError(name, "wrong field count", lineno);
    t.domains.push_back((*fields)[0]);
    std::vector<double> v;
    v.reserve(t.columns.size());
    for (std::size_t i = 1; i < fields->size(); ++i) {
      auto x = csv::parse_double((*fields)[i]);
      if (!x) throw ParseError(name, "bad number '" + (*fields)[i] + "'", lineno);
      v.push_back(*x);
    }
    t.rows.push_back(std::move(v));
  }
  return t;
}

}  // namespace burstprof
