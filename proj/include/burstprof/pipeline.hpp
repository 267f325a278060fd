#pragma once

// Threshold, decompose and aggregate a batch of traces in one call.

#include <span>
#include <vector>

#include "burstprof/burstseg.hpp"
#include "burstprof/featex.hpp"
#include "burstprof/trace.hpp"

namespace burstprof {

struct TraceAnalysis {
  std::vector<UserThreshold> thresholds;    // aligned with the input traces
  std::vector<std::vector<Burst>> bursts;   // aligned with the input traces
  std::vector<DomainFeatures> features;     // ordered by domain
};

inline TraceAnalysis analyze(std::span<const UserTrace> traces, const BurstConfig& cfg = {},
                             SizeUnit unit = SizeUnit::Kilobytes) {
  TraceAnalysis a;
  a.thresholds = batch_thresholds(traces, cfg);
  FeatureAccumulator acc(unit);
  a.bursts.reserve(traces.size());
  for (std::size_t u = 0; u < traces.size(); ++u) {
    a.bursts.push_back(decompose(traces[u], a.thresholds[u].tau_star));
    acc.add_user(traces[u], a.bursts.back());
  }
  a.features = acc.finalize();
  return a;
}

}  // namespace burstprof
