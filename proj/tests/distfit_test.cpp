#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "burstprof/distfit.hpp"
#include "burstprof/random.hpp"
#include "burstprof/synthgen.hpp"

using namespace burstprof;

namespace {

FittedDensity model(DensityParams p) {
  FittedDensity m;
  m.params = p;
  m.family = static_cast<DensityFamily>(p.index());
  return m;
}

// Composite Simpson of f(e^t) e^t over t in [log lo, log hi], with extra
// breakpoints so kinks sit on panel edges.
double integrate_log(const FittedDensity& m, double lo, double hi, std::vector<double> breaks = {}) {
  breaks.push_back(lo);
  breaks.push_back(hi);
  std::sort(breaks.begin(), breaks.end());
  double total = 0.0;
  for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
    const double a = std::log(breaks[b]), c = std::log(breaks[b + 1]);
    const int n = 200000;
    const double h = (c - a) / n;
    auto f = [&](double t) { return density_at(m, std::exp(t)) * std::exp(t); };
    double s = f(a) + f(c);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    total += s * h / 3.0;
  }
  return total;
}

std::vector<double> exp_samples(Rng& rng, std::size_t n, double rate) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.exponential(rate);
  return v;
}

std::vector<double> synth_gaps(std::uint64_t seed, std::size_t target) {
  auto cfg = default_synth_config(seed, 20, 40);
  cfg.n_users = 1;
  cfg.records_per_burst = {20, 40};
  const auto mean_bursts = static_cast<std::int64_t>(
      static_cast<double>(target) / (0.5 * static_cast<double>(cfg.records_per_burst.min + cfg.records_per_burst.max)));
  cfg.bursts_per_user = {mean_bursts + 200, mean_bursts + 200};
  cfg.within_rate = continuous_within_rate(cfg);
  auto data = generate(cfg);
  auto g = interarrivals(data[0].trace).gaps;
  g.resize(std::min(g.size(), target));
  return g;
}

}  // namespace

TEST(DensityAt, Examples) {
  EXPECT_DOUBLE_EQ(density_at(model(ExpParams{1.0}), 0.0), 1.0);
  EXPECT_DOUBLE_EQ(density_at(model(ParetoParams{1.0, 2.0}), 1.0), 2.0);
  EXPECT_DOUBLE_EQ(density_at(model(Exp2Params{0.5, 2.0, 1.0}), 0.0), 1.5);
}

TEST(DensityAt, OutsideSupportIsZero) {
  EXPECT_EQ(density_at(model(ExpParams{1.0}), -1.0), 0.0);
  EXPECT_EQ(density_at(model(ParetoParams{2.0, 1.5}), 1.0), 0.0);
  EXPECT_EQ(density_at(model(Pareto2Params{0.3, 2.0, 3.0, 1.0}), 1.99), 0.0);
  EXPECT_EQ(density_at(model(make_exp_pareto(1.0, 1.5, 3.0)), -0.1), 0.0);
}

TEST(DensityAt, EveryFamilyIntegratesToOne) {
  const FittedDensity ms[] = {
      model(ExpParams{0.7}),
      model(ParetoParams{0.5, 1.3}),
      model(Exp2Params{0.6, 4.0, 0.2}),
      model(Pareto2Params{0.4, 0.3, 3.0, 1.1}),
      model(make_exp_pareto(0.8, 1.4, 2.5)),
  };
  for (const auto& m : ms) {
    double lo = 1e-12;
    std::vector<double> breaks;
    if (auto* p = std::get_if<ParetoParams>(&m.params)) lo = p->x_min;
    if (auto* p = std::get_if<Pareto2Params>(&m.params)) lo = p->x_min;
    if (auto* p = std::get_if<ExpParetoParams>(&m.params)) breaks.push_back(p->d);
    EXPECT_NEAR(integrate_log(m, lo, 1e13, breaks), 1.0, 1e-3) << family_name(m.family);
  }
}

TEST(ExpPareto, ConstantsFollowContinuityAndNormalization) {
  for (double rate : {0.1, 1.0, 5.0})
    for (double alpha : {0.5, 1.5, 3.0})
      for (double d : {0.5, 5.0}) {
        auto p = make_exp_pareto(rate, alpha, d);
        EXPECT_NEAR(p.c / (std::exp(-rate * d) * std::pow(d, alpha + 1.0)), 1.0, 1e-12);
        const double z = 1.0 / ((1.0 - std::exp(-rate * d)) / rate + std::exp(-rate * d) * d / alpha);
        EXPECT_NEAR(p.z / z, 1.0, 1e-12);
        // body at d versus tail z c x^-(alpha+1) at d
        const double left = p.z * std::exp(-rate * d);
        const double right = p.z * p.c * std::pow(d, -(alpha + 1.0));
        EXPECT_NEAR(left / right, 1.0, 1e-9);
        auto m = model(p);
        const double below = density_at(m, std::nextafter(d, 0.0));
        const double above = density_at(m, std::nextafter(d, HUGE_VAL));
        EXPECT_NEAR(below / above, 1.0, 1e-9);
      }
}

TEST(FitMle, ExpClosedFormOnSmallSample) {
  const std::vector<double> xs{1, 2, 3};
  auto m = detail::fit_exp(xs);
  EXPECT_DOUBLE_EQ(std::get<ExpParams>(m.params).rate, 0.5);
  EXPECT_NEAR(m.log_likelihood, 3 * std::log(0.5) - 3, 1e-12);
  m.n = 3;
  EXPECT_NEAR(aic(m), 12.1589, 1e-4);
  EXPECT_NEAR(bic(m), 11.2575, 1e-4);
}

TEST(FitMle, ExpOnReplicatedSampleMatchesClosedForm) {
  std::vector<double> xs;
  for (int r = 0; r < 4; ++r) xs.insert(xs.end(), {1, 2, 3});
  auto m = fit_mle(DensityFamily::EXP, xs);
  EXPECT_DOUBLE_EQ(std::get<ExpParams>(m.params).rate, 0.5);
  EXPECT_EQ(m.n, 12u);
}

TEST(FitMle, ParetoClosedFormOnSmallSample) {
  const std::vector<double> xs{1, 2, 4};
  auto m = detail::fit_pareto(xs);
  const auto& p = std::get<ParetoParams>(m.params);
  EXPECT_EQ(p.x_min, 1.0);
  EXPECT_NEAR(p.alpha, 3.0 / (std::log(2.0) + std::log(4.0)), 1e-12);
  EXPECT_NEAR(p.alpha, 1.4427, 1e-4);
}

TEST(FitMle, AicBicCrossWhereLogNIsTwo) {
  FittedDensity m = model(ExpParams{1.0});
  m.log_likelihood = -4.2;
  m.n = 7;  // ln 7 < 2 < ln 8, so the crossing lies between
  EXPECT_LT(bic(m), aic(m));
  m.n = 8;
  EXPECT_GT(bic(m), aic(m));
  for (std::size_t n : {3u, 50u, 1000u}) {
    m.n = n;
    EXPECT_NEAR(aic(m) - bic(m), 2.0 - std::log(static_cast<double>(n)), 1e-12);
  }
}

TEST(FitMle, ExpMaximizesLikelihood) {
  Rng rng(8);
  auto xs = exp_samples(rng, 500, 2.5);
  auto m = fit_mle(DensityFamily::EXP, xs);
  const double sum = std::accumulate(xs.begin(), xs.end(), 0.0);
  const double n = static_cast<double>(xs.size());
  for (int i = 0; i < 100; ++i) {
    const double lam = rng.uniform(0.01, 20.0);
    EXPECT_GE(m.log_likelihood, n * std::log(lam) - lam * sum);
  }
}

TEST(FitMle, TooFewSamplesIsInsufficientData) {
  std::vector<double> nine(9, 1.0);
  EXPECT_THROW(fit_mle(DensityFamily::EXP, nine), InsufficientDataError);
  std::vector<double> forty(40);
  std::iota(forty.begin(), forty.end(), 1.0);
  EXPECT_THROW(fit_mle(DensityFamily::EXP2, forty), InsufficientDataError);
  EXPECT_THROW(fit_mle(DensityFamily::EXP_PRT, forty), InsufficientDataError);
}

TEST(FitMle, ZerosExcludedAndCounted) {
  std::vector<double> xs{0, 0, 0};
  for (int i = 1; i <= 12; ++i) xs.push_back(i);
  auto m = fit_mle(DensityFamily::EXP, xs);
  EXPECT_EQ(m.n, 12u);
  EXPECT_EQ(m.zeros, 3u);
  EXPECT_DOUBLE_EQ(std::get<ExpParams>(m.params).rate, 12.0 / 78.0);
}

TEST(FitMle, EmIsMonotoneAndOrdered) {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> xs = exp_samples(rng, 2000, 8.0);
    for (double x : exp_samples(rng, 500, 0.3)) xs.push_back(x);
    for (auto f : {DensityFamily::EXP2, DensityFamily::PRT2}) {
      FittedDensity m;
      try {
        m = fit_mle(f, xs);
      } catch (const ConvergenceError& e) {
        m = e.best();
      }
      ASSERT_FALSE(m.loglik_history.empty());
      for (std::size_t i = 1; i < m.loglik_history.size(); ++i)
        EXPECT_GE(m.loglik_history[i], m.loglik_history[i - 1] - 1e-9 * std::abs(m.loglik_history[i - 1]))
            << family_name(f) << " iteration " << i;
    }
    auto e2 = std::get<Exp2Params>(fit_mle(DensityFamily::EXP2, xs).params);
    EXPECT_GT(e2.rate1, e2.rate2);
    EXPECT_GT(e2.w, 0.0);
    EXPECT_LT(e2.w, 1.0);
  }
}

TEST(FitMle, ExpParetoRecoversBoundary) {
  auto gaps = synth_gaps(4, 100000);
  ASSERT_EQ(gaps.size(), 100000u);
  auto m = fit_mle(DensityFamily::EXP_PRT, gaps);
  const auto& p = std::get<ExpParetoParams>(m.params);
  EXPECT_NEAR(p.d, 5.0, 0.5);
  EXPECT_GT(p.rate, 0.0);
  EXPECT_GT(p.alpha, 0.0);
}

TEST(SelectFamily, ExpParetoWinsOnGeneratorData) {
  auto gaps = synth_gaps(12, 100000);
  auto sel = select_family(gaps);
  ASSERT_EQ(sel.ranked.size(), 5u);
  EXPECT_EQ(sel.ranked.front().family, DensityFamily::EXP_PRT);
  for (std::size_t i = 1; i < sel.ranked.size(); ++i) EXPECT_LE(sel.ranked[i - 1].aic, sel.ranked[i].aic);
}

TEST(SelectFamily, ExpNearMinimumOnExponentialData) {
  Rng rng(3);
  auto xs = exp_samples(rng, 5000, 1.0);
  auto sel = select_family(xs);
  ASSERT_FALSE(sel.ranked.empty());
  double exp_aic = HUGE_VAL;
  for (const auto& r : sel.ranked)
    if (r.family == DensityFamily::EXP) exp_aic = r.aic;
  EXPECT_LE(exp_aic - sel.ranked.front().aic, 2.0);
}

TEST(SelectFamily, SingleFamilyAndPermutationInvariance) {
  Rng rng(9);
  auto xs = exp_samples(rng, 400, 1.0);
  const DensityFamily only[] = {DensityFamily::PRT};
  auto single = select_family(xs, only);
  ASSERT_EQ(single.ranked.size(), 1u);
  EXPECT_EQ(single.ranked[0].family, DensityFamily::PRT);

  auto a = select_family(xs);
  rng.shuffle(xs.begin(), xs.end());
  auto b = select_family(xs);
  ASSERT_EQ(a.ranked.size(), b.ranked.size());
  for (std::size_t i = 0; i < a.ranked.size(); ++i) EXPECT_EQ(a.ranked[i].family, b.ranked[i].family);
}

TEST(Kde, DegenerateSamplesPeakSymmetrically) {
  std::vector<double> xs(20, 5.0);
  auto k = kde(xs);
  EXPECT_FALSE(k.warnings.empty());
  EXPECT_EQ(k.bandwidth, kMinBandwidth);
  const auto peak = std::max_element(k.density.begin(), k.density.end()) - k.density.begin();
  EXPECT_NEAR(k.grid[peak], 5.0, 2 * (k.grid[1] - k.grid[0]));
  const std::size_t n = k.density.size();
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(k.density[i], k.density[n - 1 - i], 1e-6 * k.density[peak]);
}

TEST(Kde, IntegratesToOne) {
  Rng rng(14);
  auto xs = exp_samples(rng, 3000, 0.5);
  auto k = kde(xs);
  EXPECT_EQ(k.grid.size(), 2048u);
  EXPECT_NEAR(trapezoid(k.grid, k.density), 1.0, 0.01);
  for (double v : k.density) EXPECT_GE(v, 0.0);
  EXPECT_EQ(k.grid.front(), 0.0);
}

TEST(Kde, TwoClustersTwoMaxima) {
  Rng rng(15);
  std::vector<double> xs;
  for (int i = 0; i < 1000; ++i) xs.push_back(2.0 + rng.normal(0, 0.2));
  for (int i = 0; i < 1000; ++i) xs.push_back(8.0 + rng.normal(0, 0.2));
  auto k = kde(xs);
  int maxima = 0;
  for (std::size_t i = 1; i + 1 < k.density.size(); ++i)
    if (k.density[i] - k.density[i - 1] > 0 && k.density[i + 1] - k.density[i] <= 0) ++maxima;
  EXPECT_EQ(maxima, 2);
}

TEST(Kde, TooFewSamplesThrows) {
  std::vector<double> one{1.0};
  EXPECT_THROW(kde(one), InsufficientDataError);
}

TEST(FitErrorSb, ZeroWhenModelIsTarget) {
  auto m = model(make_exp_pareto(1.2, 1.5, 2.0));
  KernelDensity t;
  for (int i = 0; i < 2048; ++i) {
    t.grid.push_back(20.0 * i / 2047.0);
    t.density.push_back(density_at(m, t.grid.back()));
  }
  EXPECT_NEAR(fit_error_sb(t, m), 0.0, 1e-12);
}

TEST(FitErrorSb, DisjointSupportsNearTwo) {
  Rng rng(16);
  std::vector<double> xs;
  for (int i = 0; i < 2000; ++i) xs.push_back(90.0 + rng.normal(0, 0.3));
  auto t = kde(xs);
  EXPECT_NEAR(fit_error_sb(t, model(ExpParams{1.0})), 2.0, 0.02);
}

TEST(FitErrorSb, BoundedForEveryFit) {
  Rng rng(17);
  std::vector<double> xs = exp_samples(rng, 3000, 4.0);
  for (int i = 0; i < 500; ++i) xs.push_back(rng.pareto(2.0, 1.3));
  auto t = kde(xs);
  for (const auto& r : select_family(xs).ranked) {
    const double sb = fit_error_sb(t, r.model);
    EXPECT_GE(sb, 0.0);
    EXPECT_LE(sb, 2.0);
  }
}
