#pragma once

// Adaptive per-user burst threshold and burst decomposition.
//
// Gaps are binned with width l; bin i (1-based) holds gaps in [(i-1)l, il).
// Each bin's contribution is k_i = c_i / sum_{j<=i} c_j. The threshold bin i*
// is the smallest index at or after the first non-empty bin such that the next
// J bins all have k < p. Bins past the end of the histogram count as k = 0.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "burstprof/distfit.hpp"
#include "burstprof/error.hpp"
#include "burstprof/trace.hpp"

namespace burstprof {

struct BurstConfig {
  double bin_length = 0.1;  // seconds
  double p = 0.01;
  int run_length = 10;      // J
  std::size_t min_gaps = 10;  // users below this fall back to the batch default

  void validate() const {
    if (!(bin_length > 0)) throw ConfigError("bin length must be positive");
    if (!(p > 0 && p < 1)) throw ConfigError("p must lie in (0,1)");
    if (run_length < 1) throw ConfigError("J must be >= 1");
  }
};

struct GapHistogram {
  double bin_length = 0.1;
  std::vector<std::uint64_t> counts;  // counts[0] is bin 1
  std::uint64_t total = 0;

  std::size_t bins() const noexcept { return counts.size(); }
  // 1-based accessor; out-of-range bins are empty
  std::uint64_t count(std::size_t i) const noexcept {
    return i >= 1 && i <= counts.size() ? counts[i - 1] : 0;
  }
};

struct ThresholdResult {
  double tau_star = 0.0;
  std::size_t i_star = 0;
  std::vector<double> contributions;  // k_1..k_n, 0 where undefined
};

inline GapHistogram gap_histogram(std::span<const double> gaps, double bin_length) {
  if (!(bin_length > 0)) throw ConfigError("bin length must be positive");
  GapHistogram h;
  h.bin_length = bin_length;
  for (double g : gaps) {
    if (!std::isfinite(g) || g < 0) continue;
    auto idx = static_cast<std::size_t>(std::floor(g / bin_length));  // 0-based bin
    if (idx >= h.counts.size()) h.counts.resize(idx + 1, 0);
    ++h.counts[idx];
    ++h.total;
  }
  return h;
}

inline GapHistogram gap_histogram(const InterArrivalSeq& seq, double bin_length) {
  return gap_histogram(std::span<const double>(seq.gaps), bin_length);
}

inline std::vector<double> bin_contributions(const GapHistogram& hist) {
  std::vector<double> k(hist.bins(), 0.0);
  std::uint64_t cum = 0;
  for (std::size_t i = 0; i < hist.bins(); ++i) {
    cum += hist.counts[i];
    if (cum > 0) k[i] = static_cast<double>(hist.counts[i]) / static_cast<double>(cum);
  }
  return k;
}

inline ThresholdResult adaptive_threshold(const GapHistogram& hist, double p, int run_length) {
  if (hist.total == 0) throw NoThresholdError("empty gap histogram");
  if (run_length < 1) throw ConfigError("J must be >= 1");

  ThresholdResult res;
  res.contributions = bin_contributions(hist);
  const auto& k = res.contributions;
  const std::size_t n = k.size();

  std::size_t first = 0;
  while (first < n && hist.counts[first] == 0) ++first;

  // 0-based candidate c (bin c+1) qualifies when 0-based bins c+1..c+J are
  // all quiet (k < p). quiet_after[c] counts that run, capped at J.
  const auto J = static_cast<std::size_t>(run_length);
  std::vector<std::size_t> quiet_after(n, 0);
  std::size_t quiet = J;  // bins beyond the histogram are quiet
  for (std::size_t c = n; c-- > 0;) {
    quiet_after[c] = quiet;
    quiet = (k[c] < p) ? std::min(quiet + 1, J) : 0;
  }
  for (std::size_t c = first; c < n; ++c) {
    if (quiet_after[c] >= J) {
      res.i_star = c + 1;
      res.tau_star = hist.bin_length * static_cast<double>(res.i_star);
      return res;
    }
  }
  // Unreachable: the last bin is always followed by J out-of-range quiet bins.
  throw NoThresholdError("no threshold bin found");
}

inline ThresholdResult adaptive_threshold(const InterArrivalSeq& gaps, const BurstConfig& cfg) {
  cfg.validate();
  if (gaps.size() < cfg.min_gaps)
    throw NoThresholdError("only " + std::to_string(gaps.size()) + " gaps, need " +
                           std::to_string(cfg.min_gaps));
  return adaptive_threshold(gap_histogram(gaps, cfg.bin_length), cfg.p, cfg.run_length);
}

struct UserThreshold {
  std::string user_id;
  double tau_star = 0.0;
  bool fallback = false;  // true when the batch median was substituted
};

// Per-user thresholds for a batch; users with no threshold get the median of
// the successful ones, or default_tau when none succeed.
inline std::vector<UserThreshold> batch_thresholds(std::span<const UserTrace> traces,
                                                   const BurstConfig& cfg,
                                                   double default_tau = 1.0) {
  cfg.validate();
  std::vector<UserThreshold> out(traces.size());
  std::vector<double> ok;
  for (std::size_t u = 0; u < traces.size(); ++u) {
    out[u].user_id = traces[u].user_id();
    try {
      out[u].tau_star = adaptive_threshold(interarrivals(traces[u]), cfg).tau_star;
      ok.push_back(out[u].tau_star);
    } catch (const NoThresholdError&) {
      out[u].fallback = true;
    }
  }
  double fallback = default_tau;
  if (!ok.empty()) {
    std::sort(ok.begin(), ok.end());
    const std::size_t m = ok.size();
    fallback = m % 2 ? ok[m / 2] : 0.5 * (ok[m / 2 - 1] + ok[m / 2]);
  }
  for (auto& t : out)
    if (t.fallback) t.tau_star = fallback;
  return out;
}

// Threshold implied by a fitted model: the 99% quantile of the fast EXP2
// component, or the EXP_PRT boundary d.
inline double model_threshold(const FittedDensity& model) {
  if (const auto* p = std::get_if<Exp2Params>(&model.params)) return std::log(100.0) / p->rate1;
  if (const auto* p = std::get_if<ExpParetoParams>(&model.params)) return p->d;
  throw UnsupportedFamilyError("no model threshold for family " + std::string(family_name(model.family)));
}

struct Burst {
  std::string user_id;
  std::size_t first = 0;  // index of the first record in the trace
  std::size_t count = 0;  // number of records
  double start = 0.0;
  double end = 0.0;
  std::uint64_t upload = 0;
  std::uint64_t download = 0;
  std::vector<std::string> unique_domains;  // by first appearance

  double duration() const noexcept { return end - start; }
  std::size_t last() const noexcept { return first + count - 1; }
};

inline std::vector<Burst> decompose(const UserTrace& trace, double tau_star) {
  if (!(tau_star > 0)) throw ConfigError("tau* must be positive");
  std::vector<Burst> bursts;
  const auto& recs = trace.records();
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    if (i == 0 || !(r.timestamp - recs[i - 1].timestamp < tau_star)) {
      Burst b;
      b.user_id = trace.user_id();
      b.first = i;
      b.start = r.timestamp;
      bursts.push_back(std::move(b));
    }
    Burst& b = bursts.back();
    ++b.count;
    b.end = r.timestamp;
    b.upload += r.upload_size;
    b.download += r.download_size;
    if (std::find(b.unique_domains.begin(), b.unique_domains.end(), r.domain) == b.unique_domains.end())
      b.unique_domains.push_back(r.domain);
  }
  return bursts;
}

// Burst id per record, aligned with trace.records().
inline std::vector<std::size_t> burst_ids(std::span<const Burst> bursts, std::size_t n_records) {
  std::vector<std::size_t> ids(n_records, 0);
  for (std::size_t b = 0; b < bursts.size(); ++b)
    for (std::size_t i = 0; i < bursts[b].count; ++i) ids[bursts[b].first + i] = b;
  return ids;
}

}  // namespace burstprof
