#pragma once

// Classifier evaluation (confusion counts, trade-off ratios, ROC) and the
// top-k activity variation entropy across users.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "burstprof/csv.hpp"
#include "burstprof/error.hpp"
#include "burstprof/trace.hpp"

namespace burstprof {

struct ConfusionMatrix {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

namespace detail {

inline void check_inputs(std::span<const int> labels, std::span<const double> probs) {
  if (labels.size() != probs.size())
    throw ConfigError("labels and probabilities differ in length (" + std::to_string(labels.size()) + " vs " +
                      std::to_string(probs.size()) + ")");
  for (int y : labels)
    if (y != 0 && y != 1) throw ConfigError("labels must be 0 or 1");
  for (double q : probs)
    if (!(q >= 0 && q <= 1)) throw ConfigError("probabilities must lie in [0,1]");
}

}  // namespace detail

// Representative iff q >= h.
inline ConfusionMatrix confusion(std::span<const int> labels, std::span<const double> probs, double h) {
  detail::check_inputs(labels, probs);
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred = probs[i] >= h;
    if (labels[i]) pred ? ++cm.tp : ++cm.fn;
    else pred ? ++cm.fp : ++cm.tn;
  }
  return cm;
}

struct TradeoffMetrics {
  std::optional<double> precision, npv, sensitivity, specificity, accuracy;
};

inline TradeoffMetrics tradeoff_metrics(const ConfusionMatrix& cm) {
  auto ratio = [](std::uint64_t num, std::uint64_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  return {ratio(cm.tp, cm.tp + cm.fp), ratio(cm.tn, cm.tn + cm.fn), ratio(cm.tp, cm.tp + cm.fn),
          ratio(cm.tn, cm.tn + cm.fp), ratio(cm.tp + cm.tn, cm.total())};
}

struct RocPoint {
  double threshold = 0.0;  // predicted positive iff q >= threshold
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // from threshold +inf down to the smallest q
  double auc = 0.0;
};

// One point per distinct probability plus the all-negative start. AUC is the
// trapezoid area, which counts tied pairs as half concordant.
inline RocCurve roc_auc(std::span<const int> labels, std::span<const double> probs) {
  detail::check_inputs(labels, probs);
  std::uint64_t pos = 0;
  for (int y : labels) pos += static_cast<std::uint64_t>(y);
  const std::uint64_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw ConfigError("ROC needs both classes present");

  std::vector<std::size_t> order(labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });

  RocCurve roc;
  roc.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::uint64_t tp = 0, fp = 0, prev_tp = 0, prev_fp = 0;
  std::uint64_t area2 = 0;  // twice the area in units of 1/(pos*neg)
  for (std::size_t i = 0; i < order.size();) {
    const double t = probs[order[i]];
    for (; i < order.size() && probs[order[i]] == t; ++i) labels[order[i]] ? ++tp : ++fp;
    area2 += (fp - prev_fp) * (tp + prev_tp);
    roc.points.push_back({t, static_cast<double>(fp) / static_cast<double>(neg),
                          static_cast<double>(tp) / static_cast<double>(pos)});
    prev_tp = tp;
    prev_fp = fp;
  }
  roc.auc = static_cast<double>(area2) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  return roc;
}

struct ThresholdChoice {
  double h = 0.5;
  ConfusionMatrix cm;
  double score = 0.0;  // the optimised quantity at h
};

namespace detail {

// Candidate thresholds: every distinct probability, plus one above all.
inline std::vector<double> candidate_thresholds(std::span<const double> probs) {
  std::vector<double> t(probs.begin(), probs.end());
  std::sort(t.begin(), t.end(), std::greater<>());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  t.insert(t.begin(), std::numeric_limits<double>::infinity());
  return t;
}

}  // namespace detail

// Threshold with the highest accuracy; ties keep the largest threshold.
inline ThresholdChoice best_accuracy_threshold(std::span<const int> labels, std::span<const double> probs) {
  detail::check_inputs(labels, probs);
  if (labels.empty()) throw InsufficientDataError(0, 1);
  ThresholdChoice best;
  best.score = -1.0;
  for (double t : detail::candidate_thresholds(probs)) {
    auto cm = confusion(labels, probs, t);
    const double acc = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
    if (acc > best.score) best = {t, cm, acc};
  }
  return best;
}

// Threshold minimising FPR + FNR; ties keep the largest threshold.
inline ThresholdChoice min_error_sum_threshold(std::span<const int> labels, std::span<const double> probs) {
  detail::check_inputs(labels, probs);
  ThresholdChoice best;
  best.score = std::numeric_limits<double>::infinity();
  for (double t : detail::candidate_thresholds(probs)) {
    auto cm = confusion(labels, probs, t);
    if (cm.tp + cm.fn == 0 || cm.tn + cm.fp == 0) throw ConfigError("error-rate threshold needs both classes");
    const double fpr = static_cast<double>(cm.fp) / static_cast<double>(cm.fp + cm.tn);
    const double fnr = static_cast<double>(cm.fn) / static_cast<double>(cm.fn + cm.tp);
    if (fpr + fnr < best.score) best = {t, cm, fpr + fnr};
  }
  return best;
}

struct TopKProfile {
  std::size_t k = 0;
  std::vector<std::pair<std::string, std::vector<std::string>>> users;  // user id, top-k domains

  void validate() const {
    if (k == 0) throw ConfigError("k must be >= 1");
    for (const auto& [u, ds] : users) {
      if (ds.size() != k) throw ConfigError("user '" + u + "' has " + std::to_string(ds.size()) + " domains, not k");
      auto sorted = ds;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ConfigError("user '" + u + "' lists a domain twice");
    }
  }
};

// Top-k domains per user by record count, ties broken by domain name. Users
// with fewer than k distinct domains are left out.
inline TopKProfile topk_profiles(std::span<const UserTrace> traces, std::size_t k) {
  if (k == 0) throw ConfigError("k must be >= 1");
  TopKProfile prof;
  prof.k = k;
  for (const auto& t : traces) {
    std::map<std::string, std::size_t> counts;
    for (const auto& r : t.records()) ++counts[r.domain];
    if (counts.size() < k) continue;
    std::vector<std::pair<std::string, std::size_t>> v(counts.begin(), counts.end());
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> top;
    for (std::size_t i = 0; i < k; ++i) top.push_back(v[i].first);
    prof.users.emplace_back(t.user_id(), std::move(top));
  }
  return prof;
}

// Normalised entropy of pooled top-k appearances:
//   S_a = (H - ln k) / (ln(nk) - ln k),  H = -sum_i (n_i/nk) ln(n_i/nk)
// evaluated in the equivalent form 1 - sum_i n_i ln n_i / (nk ln n), summed
// per distinct count so the extreme profiles land exactly on 0 and 1.
inline double topk_variation(const TopKProfile& profile) {
  profile.validate();
  const std::size_t n = profile.users.size();
  if (n < 2) throw InsufficientDataError(n, 2);
  std::map<std::string, std::uint64_t> appearances;
  for (const auto& [u, ds] : profile.users)
    for (const auto& d : ds) ++appearances[d];
  std::map<std::uint64_t, std::uint64_t> multiplicity;  // count -> number of domains with it
  for (const auto& [d, c] : appearances) ++multiplicity[c];
  double sum = 0.0;
  for (const auto& [c, m] : multiplicity)
    if (c > 1) sum += static_cast<double>(m * c) * std::log(static_cast<double>(c));
  const auto total = static_cast<std::uint64_t>(n) * profile.k;
  const double s = 1.0 - sum / (static_cast<double>(total) * std::log(static_cast<double>(n)));
  return std::clamp(s, 0.0, 1.0);
}

inline void write_roc_csv(const RocCurve& roc, std::ostream& out) {
  out << "threshold,fpr,tpr\n";
  for (const auto& p : roc.points)
    out << csv::format_double(p.threshold) << ',' << csv::format_double(p.fpr) << ','
        << csv::format_double(p.tpr) << '\n';
}

inline void write_metrics_header(std::ostream& out) { out << "h,precision,npv,sensitivity,specificity,accuracy\n"; }

// Absent ratios are written as empty fields.
inline void write_metrics_row(double h, const TradeoffMetrics& m, std::ostream& out) {
  auto field = [](const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string(); };
  out << csv::format_double(h) << ',' << field(m.precision) << ',' << field(m.npv) << ',' << field(m.sensitivity)
      << ',' << field(m.specificity) << ',' << field(m.accuracy) << '\n';
}

}  // namespace burstprof
