#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "burstprof/burstseg.hpp"
#include "burstprof/ingest.hpp"
#include "burstprof/synthgen.hpp"

using namespace burstprof;

namespace {

SynthConfig small_config(std::uint64_t seed) {
  auto cfg = default_synth_config(seed, 20, 40);
  cfg.n_users = 4;
  cfg.bursts_per_user = {100, 150};
  return cfg;
}

}  // namespace

TEST(Synthgen, SingleRecordWorld) {
  auto cfg = default_synth_config(3);
  cfg.n_users = 1;
  cfg.bursts_per_user = {1, 1};
  cfg.records_per_burst = {1, 1};
  auto data = generate(cfg);
  ASSERT_EQ(data.size(), 1u);
  ASSERT_EQ(data[0].trace.size(), 1u);
  ASSERT_EQ(data[0].burst_ids.size(), 1u);
  EXPECT_EQ(data[0].burst_ids[0], 0u);
}

TEST(Synthgen, EmptyDomainListsRejected) {
  auto cfg = default_synth_config(1);
  cfg.representative_domains.clear();
  EXPECT_THROW(generate(cfg), ConfigError);
  cfg = default_synth_config(1);
  cfg.noise_domains.clear();
  EXPECT_THROW(generate(cfg), ConfigError);
  cfg = default_synth_config(1);
  cfg.p_first_representative = 1.5;
  EXPECT_THROW(generate(cfg), ConfigError);
}

TEST(Synthgen, GapsRespectBoundary) {
  auto cfg = small_config(17);
  for (const auto& lt : generate(cfg)) {
    const auto& recs = lt.trace.records();
    for (std::size_t i = 1; i < recs.size(); ++i) {
      const double g = recs[i].timestamp - recs[i - 1].timestamp;
      if (lt.burst_ids[i] == lt.burst_ids[i - 1]) {
        EXPECT_GE(g, 0.0);
        EXPECT_LT(g, cfg.boundary);
      } else {
        EXPECT_GE(g, cfg.boundary);
      }
    }
  }
}

TEST(Synthgen, StructuralInvariants) {
  auto cfg = small_config(23);
  std::set<std::string> users;
  for (const auto& lt : generate(cfg)) {
    users.insert(lt.trace.user_id());
    ASSERT_EQ(lt.burst_ids.size(), lt.trace.size());
    EXPECT_EQ(lt.burst_ids.front(), 0u);
    for (std::size_t i = 1; i < lt.burst_ids.size(); ++i) {
      EXPECT_GE(lt.burst_ids[i], lt.burst_ids[i - 1]);
      EXPECT_LE(lt.burst_ids[i], lt.burst_ids[i - 1] + 1);
    }
    const auto n_bursts = static_cast<std::int64_t>(lt.burst_ids.back() + 1);
    EXPECT_GE(n_bursts, cfg.bursts_per_user.min);
    EXPECT_LE(n_bursts, cfg.bursts_per_user.max);
    for (const auto& r : lt.trace.records()) {
      EXPECT_TRUE(lt.labels.count(r.domain)) << r.domain;
      EXPECT_TRUE(is_bare_domain(r.domain));
    }
  }
  EXPECT_EQ(users.size(), cfg.n_users);
}

TEST(Synthgen, SameSeedIsByteIdentical) {
  auto render = [](const SynthConfig& cfg) {
    auto data = generate(cfg);
    std::vector<UserTrace> traces;
    for (auto& lt : data) traces.push_back(lt.trace);
    std::ostringstream out;
    write_traces(traces, out);
    write_bursts(data, out);
    write_labels(merged_labels(data), out);
    return out.str();
  };
  auto cfg = small_config(99);
  const auto a = render(cfg);
  EXPECT_EQ(a, render(cfg));
  cfg.seed = 100;
  EXPECT_NE(a, render(cfg));
}

TEST(Synthgen, ThresholdBetweenComponentsRecoversBursts) {
  auto cfg = small_config(31);
  for (const auto& lt : generate(cfg)) {
    const auto& recs = lt.trace.records();
    double max_within = 0.0, min_between = HUGE_VAL;
    for (std::size_t i = 1; i < recs.size(); ++i) {
      const double g = recs[i].timestamp - recs[i - 1].timestamp;
      if (lt.burst_ids[i] == lt.burst_ids[i - 1]) max_within = std::max(max_within, g);
      else min_between = std::min(min_between, g);
    }
    ASSERT_LT(max_within, min_between);
    for (double frac : {0.01, 0.5, 0.99}) {
      const double tau = std::nextafter(max_within + frac * (min_between - max_within), HUGE_VAL);
      if (!(tau > max_within && tau <= min_between)) continue;
      auto bursts = decompose(lt.trace, tau);
      EXPECT_EQ(burst_ids(bursts, lt.trace.size()), lt.burst_ids);
    }
  }
}

TEST(Synthgen, WithinGapMeanMatchesTruncatedExponential) {
  auto cfg = default_synth_config(5, 30, 60);
  cfg.n_users = 20;
  const double lam = cfg.within_rate, d = cfg.boundary;
  const double expected = 1.0 / lam - d * std::exp(-lam * d) / -std::expm1(-lam * d);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& lt : generate(cfg)) {
    const auto& recs = lt.trace.records();
    for (std::size_t i = 1; i < recs.size(); ++i)
      if (lt.burst_ids[i] == lt.burst_ids[i - 1]) {
        sum += recs[i].timestamp - recs[i - 1].timestamp;
        ++n;
      }
  }
  ASSERT_GE(n, 100000u);
  EXPECT_NEAR(sum / static_cast<double>(n), expected, 0.05 * expected);
}

TEST(Synthgen, ContinuousWithinRateMatchesDensityAtBoundary) {
  // Continuity means the within share's truncated exponential density at d
  // equals the between share's Pareto density at d.
  auto cfg = default_synth_config(1);
  const double lam = continuous_within_rate(cfg);
  const double m = 0.5 * static_cast<double>(cfg.records_per_burst.min + cfg.records_per_burst.max);
  const double within = (m - 1) / m, between = 1 / m;
  const double d = cfg.boundary, a = cfg.out_tail_shape;
  const double left = within * lam * std::exp(-lam * d) / -std::expm1(-lam * d);
  const double right = between * a / d;
  EXPECT_NEAR(left / right, 1.0, 1e-9);
}
