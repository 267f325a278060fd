#pragma once

// Parametric inter-arrival models fitted by maximum likelihood:
//
//   EXP      lambda e^{-lambda x}
//   PRT      alpha x_m^alpha x^{-alpha-1},                  x >= x_m
//   EXP2     w EXP(lambda1) + (1-w) EXP(lambda2),           lambda1 > lambda2
//   PRT2     w PRT(x_m, alpha1) + (1-w) PRT(x_m, alpha2),   alpha1 > alpha2
//   EXP_PRT  z [e^{-lambda x} 1(x<=d) + c x^{-alpha-1} 1(x>d)]
//            c = e^{-lambda d} d^{alpha+1},
//            1/z = (1 - e^{-lambda d})/lambda + e^{-lambda d} d / alpha
//
// Zero gaps are dropped before fitting and counted in FittedDensity::zeros.
// x_m is pinned to the smallest positive sample.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "burstprof/error.hpp"

namespace burstprof {

enum class DensityFamily { EXP, PRT, EXP2, PRT2, EXP_PRT };

inline constexpr std::array<DensityFamily, 5> kAllFamilies = {
    DensityFamily::EXP, DensityFamily::PRT, DensityFamily::EXP2, DensityFamily::PRT2,
    DensityFamily::EXP_PRT};

inline std::string_view family_name(DensityFamily f) {
  switch (f) {
    case DensityFamily::EXP: return "EXP";
    case DensityFamily::PRT: return "PRT";
    case DensityFamily::EXP2: return "EXP2";
    case DensityFamily::PRT2: return "PRT2";
    case DensityFamily::EXP_PRT: return "EXP_PRT";
  }
  return "?";
}

inline DensityFamily parse_family(std::string_view s) {
  for (auto f : kAllFamilies)
    if (family_name(f) == s) return f;
  throw UnsupportedFamilyError("unknown density family '" + std::string(s) + "'");
}

// Free parameters per family; x_m is fixed at the sample minimum and z, c are
// determined by the other EXP_PRT parameters.
inline int parameter_count(DensityFamily f) {
  switch (f) {
    case DensityFamily::EXP:
    case DensityFamily::PRT: return 1;
    default: return 3;
  }
}

struct ExpParams { double rate; };
struct ParetoParams { double x_min; double alpha; };
struct Exp2Params { double w; double rate1; double rate2; };
struct Pareto2Params { double w; double x_min; double alpha1; double alpha2; };
struct ExpParetoParams {
  double rate;
  double alpha;
  double d;
  double z;
  double c;  // may under/overflow for extreme lambda*d; density_at works in log space
};

using DensityParams = std::variant<ExpParams, ParetoParams, Exp2Params, Pareto2Params, ExpParetoParams>;

struct FittedDensity {
  DensityFamily family = DensityFamily::EXP;
  DensityParams params = ExpParams{1.0};
  double log_likelihood = 0.0;
  std::size_t n = 0;       // positive samples used
  std::size_t zeros = 0;   // zero gaps excluded
  int iterations = 0;      // EM iterations, 0 for closed forms
  std::vector<double> loglik_history;  // per EM iteration
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, FittedDensity best)
      : Error(what), best_(std::move(best)) {}
  const FittedDensity& best() const noexcept { return best_; }

 private:
  FittedDensity best_;
};

// EXP_PRT normalization and continuity constants for given (lambda, alpha, d).
inline ExpParetoParams make_exp_pareto(double rate, double alpha, double d) {
  const double body = -std::expm1(-rate * d) / rate;
  const double tail = std::exp(-rate * d) * d / alpha;
  const double c = std::exp(-rate * d + (alpha + 1.0) * std::log(d));
  return {rate, alpha, d, 1.0 / (body + tail), c};
}

inline double log_density_at(const FittedDensity& m, double x) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  return std::visit(
      [x](const auto& p) -> double {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ExpParams>) {
          return x < 0 ? kNegInf : std::log(p.rate) - p.rate * x;
        } else if constexpr (std::is_same_v<P, ParetoParams>) {
          if (x < p.x_min) return kNegInf;
          return std::log(p.alpha) + p.alpha * std::log(p.x_min) - (p.alpha + 1.0) * std::log(x);
        } else if constexpr (std::is_same_v<P, Exp2Params>) {
          if (x < 0) return kNegInf;
          return std::log(p.w * p.rate1 * std::exp(-p.rate1 * x) +
                          (1.0 - p.w) * p.rate2 * std::exp(-p.rate2 * x));
        } else if constexpr (std::is_same_v<P, Pareto2Params>) {
          if (x < p.x_min) return kNegInf;
          const double l = std::log(x / p.x_min);
          const double a = std::log(p.w) + std::log(p.alpha1) - p.alpha1 * l;
          const double b = std::log1p(-p.w) + std::log(p.alpha2) - p.alpha2 * l;
          const double hi = std::max(a, b);
          return hi + std::log(std::exp(a - hi) + std::exp(b - hi)) - std::log(x);
        } else {
          if (x < 0) return kNegInf;
          if (x <= p.d) return std::log(p.z) - p.rate * x;
          return std::log(p.z) - p.rate * p.d - (p.alpha + 1.0) * std::log(x / p.d);
        }
      },
      m.params);
}

// Outside the support the density is 0.
inline double density_at(const FittedDensity& m, double x) { return std::exp(log_density_at(m, x)); }

inline double aic(const FittedDensity& m) {
  return 2.0 * parameter_count(m.family) - 2.0 * m.log_likelihood;
}

inline double bic(const FittedDensity& m) {
  return parameter_count(m.family) * std::log(static_cast<double>(m.n)) - 2.0 * m.log_likelihood;
}

struct FitOptions {
  double em_tolerance = 1e-8;  // on mean log-likelihood
  int em_max_iterations = 500;
};

inline std::size_t min_samples(DensityFamily f) {
  return (f == DensityFamily::EXP || f == DensityFamily::PRT) ? 10 : 50;
}

namespace detail {

inline double log_add(double a, double b) {
  const double hi = std::max(a, b);
  if (hi == -std::numeric_limits<double>::infinity()) return hi;
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// Two-cluster 1-D k-means on log samples; returns per-sample cluster flags
// (true = upper cluster).
inline std::vector<bool> split_log_kmeans(std::span<const double> sorted) {
  const std::size_t n = sorted.size();
  std::vector<double> lx(n);
  for (std::size_t i = 0; i < n; ++i) lx[i] = std::log(sorted[i]);
  double c0 = lx[n / 4], c1 = lx[(3 * n) / 4];
  if (c0 == c1) {
    c0 = lx.front();
    c1 = lx.back();
  }
  std::size_t cut = n / 2;  // first index of upper cluster (data sorted)
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (c0 + c1);
    const auto new_cut = static_cast<std::size_t>(std::upper_bound(lx.begin(), lx.end(), mid) - lx.begin());
    const std::size_t lo_n = std::clamp<std::size_t>(new_cut, 1, n - 1);
    c0 = std::accumulate(lx.begin(), lx.begin() + static_cast<std::ptrdiff_t>(lo_n), 0.0) / static_cast<double>(lo_n);
    c1 = std::accumulate(lx.begin() + static_cast<std::ptrdiff_t>(lo_n), lx.end(), 0.0) / static_cast<double>(n - lo_n);
    if (lo_n == cut) break;
    cut = lo_n;
  }
  std::vector<bool> upper(n, false);
  for (std::size_t i = cut; i < n; ++i) upper[i] = true;
  return upper;
}

inline std::vector<double> positive_sorted(std::span<const double> samples, std::size_t& zeros) {
  std::vector<double> xs;
  xs.reserve(samples.size());
  zeros = 0;
  for (double x : samples) {
    if (x > 0 && std::isfinite(x)) xs.push_back(x);
    else if (x == 0) ++zeros;
  }
  std::sort(xs.begin(), xs.end());
  return xs;
}

inline FittedDensity fit_exp(std::span<const double> xs) {
  const double n = static_cast<double>(xs.size());
  const double sum = std::accumulate(xs.begin(), xs.end(), 0.0);
  const double rate = n / sum;
  FittedDensity m;
  m.family = DensityFamily::EXP;
  m.params = ExpParams{rate};
  m.log_likelihood = n * std::log(rate) - rate * sum;
  return m;
}

inline FittedDensity fit_pareto(std::span<const double> sorted) {
  const double x_min = sorted.front();
  double sum_log_ratio = 0.0, sum_log = 0.0;
  for (double x : sorted) {
    sum_log_ratio += std::log(x / x_min);
    sum_log += std::log(x);
  }
  if (!(sum_log_ratio > 0)) throw Error("PRT fit degenerate: all samples equal");
  const double n = static_cast<double>(sorted.size());
  const double alpha = n / sum_log_ratio;
  FittedDensity m;
  m.family = DensityFamily::PRT;
  m.params = ParetoParams{x_min, alpha};
  m.log_likelihood = n * std::log(alpha) + n * alpha * std::log(x_min) - (alpha + 1.0) * sum_log;
  return m;
}

inline FittedDensity fit_exp2(std::span<const double> sorted, const FitOptions& opt) {
  const std::size_t n = sorted.size();
  const auto upper = split_log_kmeans(sorted);
  double s0 = 0, s1 = 0, n0 = 0, n1 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (upper[i]) { s1 += sorted[i]; n1 += 1; }
    else { s0 += sorted[i]; n0 += 1; }
  }
  double w = n0 / static_cast<double>(n);
  double r1 = n0 / s0, r2 = n1 / s1;

  FittedDensity m;
  m.family = DensityFamily::EXP2;
  std::vector<double> resp(n);
  double prev = -std::numeric_limits<double>::infinity();
  bool converged = false;
  int it = 0;
  for (; it < opt.em_max_iterations; ++it) {
    // E-step; log-likelihood is evaluated at the current parameters
    double ll = 0.0;
    const double la = std::log(w) + std::log(r1), lb = std::log1p(-w) + std::log(r2);
    double sr = 0, srx = 0, sx = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = la - r1 * sorted[i];
      const double b = lb - r2 * sorted[i];
      const double tot = log_add(a, b);
      ll += tot;
      resp[i] = std::exp(a - tot);
      sr += resp[i];
      srx += resp[i] * sorted[i];
      sx += sorted[i];
    }
    m.loglik_history.push_back(ll);
    if (ll > prev) {
      m.params = Exp2Params{w, r1, r2};
      m.log_likelihood = ll;
    }
    if (std::abs(ll - prev) / static_cast<double>(n) < opt.em_tolerance) {
      converged = true;
      break;
    }
    prev = ll;
    // M-step
    const double nd = static_cast<double>(n);
    w = std::clamp(sr / nd, 1e-12, 1.0 - 1e-12);
    r1 = sr / srx;
    r2 = (nd - sr) / (sx - srx);
  }
  m.iterations = it;
  m.n = n;
  auto& p = std::get<Exp2Params>(m.params);
  if (p.rate1 < p.rate2) p = Exp2Params{1.0 - p.w, p.rate2, p.rate1};
  if (!converged) throw ConvergenceError("EXP2 EM did not converge", m);
  return m;
}

inline FittedDensity fit_pareto2(std::span<const double> sorted, const FitOptions& opt) {
  const std::size_t n = sorted.size();
  const double x_min = sorted.front();
  std::vector<double> l(n);
  double sum_log = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    l[i] = std::log(sorted[i] / x_min);
    sum_log += std::log(sorted[i]);
  }
  const auto upper = split_log_kmeans(sorted);
  double l0 = 0, l1 = 0, n0 = 0, n1 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (upper[i]) { l1 += l[i]; n1 += 1; }
    else { l0 += l[i]; n0 += 1; }
  }
  if (!(l1 > 0)) throw Error("PRT2 fit degenerate: all samples equal");
  double w = n0 / static_cast<double>(n);
  // the lower cluster's log-ratios are small; start it steep
  double a1 = l0 > 0 ? n0 / l0 : 10.0 * n1 / l1;
  double a2 = n1 / l1;
  if (a1 <= a2) a1 = 2.0 * a2;

  FittedDensity m;
  m.family = DensityFamily::PRT2;
  double prev = -std::numeric_limits<double>::infinity();
  bool converged = false;
  int it = 0;
  for (; it < opt.em_max_iterations; ++it) {
    double ll = -sum_log;
    const double la = std::log(w) + std::log(a1), lb = std::log1p(-w) + std::log(a2);
    double sr = 0, srl = 0, sl = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = la - a1 * l[i];
      const double b = lb - a2 * l[i];
      const double tot = log_add(a, b);
      ll += tot;
      const double r = std::exp(a - tot);
      sr += r;
      srl += r * l[i];
      sl += l[i];
    }
    m.loglik_history.push_back(ll);
    if (ll > prev) {
      m.params = Pareto2Params{w, x_min, a1, a2};
      m.log_likelihood = ll;
    }
    if (std::abs(ll - prev) / static_cast<double>(n) < opt.em_tolerance) {
      converged = true;
      break;
    }
    prev = ll;
    const double nd = static_cast<double>(n);
    w = std::clamp(sr / nd, 1e-12, 1.0 - 1e-12);
    a1 = srl > 0 ? sr / srl : 1e6;
    a2 = (nd - sr) / (sl - srl);
  }
  m.iterations = it;
  m.n = n;
  auto& p = std::get<Pareto2Params>(m.params);
  if (p.alpha1 < p.alpha2) p = Pareto2Params{1.0 - p.w, p.x_min, p.alpha2, p.alpha1};
  if (!converged) throw ConvergenceError("PRT2 EM did not converge", m);
  return m;
}

// Golden-section maximization of f on [lo, hi].
template <class F>
double golden_max(F&& f, double lo, double hi, int iters = 80) {
  constexpr double g = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters && (b - a) > 1e-12 * (std::abs(a) + std::abs(b) + 1e-300); ++i) {
    if (fc >= fd) {
      b = d; d = c; fd = fc;
      c = b - g * (b - a); fc = f(c);
    } else {
      a = c; c = d; fc = fd;
      d = a + g * (b - a); fd = f(d);
    }
  }
  return fc >= fd ? c : d;
}

// Sufficient statistics for the EXP_PRT likelihood at a fixed boundary d.
class ExpParetoProfile {
 public:
  explicit ExpParetoProfile(std::span<const double> sorted) : xs_(sorted) {
    prefix_x_.resize(xs_.size() + 1, 0.0);
    prefix_log_.resize(xs_.size() + 1, 0.0);
    for (std::size_t i = 0; i < xs_.size(); ++i) {
      prefix_x_[i + 1] = prefix_x_[i] + xs_[i];
      prefix_log_[i + 1] = prefix_log_[i] + std::log(xs_[i]);
    }
  }

  struct Best {
    double loglik = -std::numeric_limits<double>::infinity();
    double rate = 0, alpha = 0, d = 0;
  };

  // Maximizes over (lambda, alpha) for the given d. alpha has a closed form
  // given lambda; lambda is searched on a log scale.
  Best at(double d) const {
    Best best;
    best.d = d;
    const std::size_t n = xs_.size();
    const auto nb = static_cast<std::size_t>(std::upper_bound(xs_.begin(), xs_.end(), d) - xs_.begin());
    const std::size_t nt = n - nb;
    if (nb == 0 || nt == 0) return best;
    const double sb = prefix_x_[nb];
    const double lt = (prefix_log_[n] - prefix_log_[nb]) - static_cast<double>(nt) * std::log(d);
    if (!(lt > 0)) return best;
    const double nd = static_cast<double>(n), ntd = static_cast<double>(nt);

    auto profile = [&](double log_rate, double* alpha_out) {
      const double rate = std::exp(log_rate);
      const double u = rate * d;
      // A/B = expm1(u)/u, computed in log space to survive large u
      const double log_a_over_b = u > 700 ? u - std::log(u) : std::log(std::expm1(u) / u);
      const double ratio = std::exp(std::min(log_a_over_b, 700.0));
      double alpha = 2.0 * nd / (lt + std::sqrt(lt * lt + 4.0 * lt * nd * ratio));
      alpha = std::max(alpha, 1e-300);
      if (alpha_out) *alpha_out = alpha;
      // log(1/z) = log(A + B/alpha)
      const double log_a = std::log(-std::expm1(-u)) - log_rate;
      const double log_b_alpha = -u + std::log(d) - std::log(alpha);
      const double log_inv_z = log_add(log_a, log_b_alpha);
      return -nd * log_inv_z - rate * (sb + ntd * d) - (alpha + 1.0) * lt;
    };

    // coarse scan over 8 decades around the body's moment estimate, then refine
    const double center = std::log(static_cast<double>(nb) / sb);
    double best_lr = center, best_ll = -std::numeric_limits<double>::infinity();
    constexpr int kSteps = 48;
    const double lo = center - 4.0 * std::log(10.0), hi = center + 4.0 * std::log(10.0);
    const double step = (hi - lo) / kSteps;
    for (int i = 0; i <= kSteps; ++i) {
      const double lr = lo + step * i;
      const double ll = profile(lr, nullptr);
      if (ll > best_ll) { best_ll = ll; best_lr = lr; }
    }
    const double lr = golden_max([&](double v) { return profile(v, nullptr); }, best_lr - step, best_lr + step);
    double alpha = 0;
    double ll = profile(lr, &alpha);
    if (ll < best_ll) {
      ll = profile(best_lr, &alpha);
      best.rate = std::exp(best_lr);
    } else {
      best.rate = std::exp(lr);
    }
    best.loglik = ll;
    best.alpha = alpha;
    return best;
  }

  std::span<const double> samples() const { return xs_; }

 private:
  std::span<const double> xs_;
  std::vector<double> prefix_x_;
  std::vector<double> prefix_log_;
};

// Quantile levels for the coarse d search: deciles plus upper-tail points,
// since the boundary often sits above the 90th percentile of gap data.
inline constexpr std::array<double, 22> kBoundaryLevels = {
    0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55,
    0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95, 0.975, 0.99, 0.995};

inline FittedDensity fit_exp_pareto(std::span<const double> sorted) {
  const ExpParetoProfile profile(sorted);
  const std::size_t n = sorted.size();
  auto level_value = [&](double q) {
    const double pos = q * static_cast<double>(n - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return i + 1 < n ? sorted[i] + frac * (sorted[i + 1] - sorted[i]) : sorted[i];
  };

  std::vector<double> grid;
  for (double q : kBoundaryLevels) grid.push_back(level_value(q));
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  ExpParetoProfile::Best best;
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto b = profile.at(grid[i]);
    if (b.loglik > best.loglik) { best = b; best_i = i; }
  }
  if (!std::isfinite(best.loglik)) throw Error("EXP_PRT fit failed: no admissible boundary");

  // refine d between the neighbouring grid points
  const double lo = grid[best_i > 0 ? best_i - 1 : 0];
  const double hi = grid[std::min(best_i + 1, grid.size() - 1)];
  if (hi > lo) {
    const double d = golden_max([&](double v) { return profile.at(std::exp(v)).loglik; },
                                std::log(lo), std::log(hi), 60);
    auto b = profile.at(std::exp(d));
    if (b.loglik > best.loglik) best = b;
  }

  FittedDensity m;
  m.family = DensityFamily::EXP_PRT;
  m.params = make_exp_pareto(best.rate, best.alpha, best.d);
  m.n = n;
  double ll = 0.0;
  for (double x : sorted) ll += log_density_at(m, x);
  m.log_likelihood = ll;
  return m;
}

}  // namespace detail

inline FittedDensity fit_mle(DensityFamily family, std::span<const double> samples,
                             const FitOptions& opt = {}) {
  std::size_t zeros = 0;
  const auto xs = detail::positive_sorted(samples, zeros);
  if (xs.size() < min_samples(family)) throw InsufficientDataError(xs.size(), min_samples(family));

  FittedDensity m;
  try {
    switch (family) {
      case DensityFamily::EXP: m = detail::fit_exp(xs); break;
      case DensityFamily::PRT: m = detail::fit_pareto(xs); break;
      case DensityFamily::EXP2: m = detail::fit_exp2(xs, opt); break;
      case DensityFamily::PRT2: m = detail::fit_pareto2(xs, opt); break;
      case DensityFamily::EXP_PRT: m = detail::fit_exp_pareto(xs); break;
    }
  } catch (ConvergenceError& e) {
    FittedDensity best = e.best();
    best.zeros = zeros;
    throw ConvergenceError(e.what(), std::move(best));
  }
  m.n = xs.size();
  m.zeros = zeros;
  return m;
}

struct RankedFit {
  DensityFamily family;
  double aic;
  double bic;
  FittedDensity model;
};

struct FamilySelection {
  std::vector<RankedFit> ranked;     // by AIC, ties by BIC
  std::vector<std::string> warnings; // one per family that failed to fit
};

inline FamilySelection select_family(std::span<const double> samples,
                                     std::span<const DensityFamily> families = kAllFamilies,
                                     const FitOptions& opt = {}) {
  FamilySelection sel;
  for (auto f : families) {
    try {
      auto m = fit_mle(f, samples, opt);
      sel.ranked.push_back({f, aic(m), bic(m), std::move(m)});
    } catch (const Error& e) {
      sel.warnings.push_back(std::string(family_name(f)) + ": " + e.what());
    }
  }
  std::stable_sort(sel.ranked.begin(), sel.ranked.end(), [](const RankedFit& a, const RankedFit& b) {
    if (a.aic != b.aic) return a.aic < b.aic;
    return a.bic < b.bic;
  });
  return sel;
}

// ---- kernel density target and fit error -------------------------------

struct GridSpec {
  std::size_t size = 2048;
  double upper_quantile = 0.999;
};

struct KernelDensity {
  std::vector<double> grid;     // ascending, seconds
  std::vector<double> density;  // same length
  double bandwidth = 0.0;
  std::vector<std::string> warnings;
};

inline double trapezoid(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return s;
}

inline constexpr double kMinBandwidth = 1e-6;

// Gaussian KDE with Silverman's bandwidth on [0, q_upper], reflected at 0 and
// renormalized to unit mass on the grid. All-equal samples get the bandwidth
// floor and a grid of +-8 bandwidths around the common value.
inline KernelDensity kde(std::span<const double> samples, const GridSpec& spec = {}) {
  std::vector<double> xs;
  for (double x : samples)
    if (x > 0 && std::isfinite(x)) xs.push_back(x);
  if (xs.size() < 2) throw InsufficientDataError(xs.size(), 2);
  if (spec.size < 2) throw ConfigError("KDE grid needs at least 2 points");
  std::sort(xs.begin(), xs.end());

  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));

  KernelDensity out;
  double h = 1.06 * sd * std::pow(n, -0.2);
  double lo = 0.0, hi;
  if (!(h >= kMinBandwidth)) {
    h = kMinBandwidth;
    out.warnings.push_back("degenerate samples: bandwidth floored at 1e-6 s");
  }
  if (xs.front() == xs.back()) {
    lo = std::max(0.0, xs.front() - 8.0 * h);
    hi = xs.front() + 8.0 * h;
  } else {
    const double pos = spec.upper_quantile * (n - 1.0);
    const auto i = static_cast<std::size_t>(pos);
    hi = i + 1 < xs.size() ? xs[i] + (pos - static_cast<double>(i)) * (xs[i + 1] - xs[i]) : xs[i];
  }
  out.bandwidth = h;
  out.grid.resize(spec.size);
  out.density.assign(spec.size, 0.0);
  const double step = (hi - lo) / static_cast<double>(spec.size - 1);
  for (std::size_t g = 0; g < spec.size; ++g) out.grid[g] = lo + step * static_cast<double>(g);

  const double reach = 8.0 * h;
  const double norm = 1.0 / (n * h * std::sqrt(2.0 * 3.14159265358979323846));
  for (std::size_t g = 0; g < spec.size; ++g) {
    const double x = out.grid[g];
    double acc = 0.0;
    auto first = std::lower_bound(xs.begin(), xs.end(), x - reach);
    auto last = std::upper_bound(xs.begin(), xs.end(), x + reach);
    for (auto it = first; it != last; ++it) {
      const double u = (x - *it) / h;
      acc += std::exp(-0.5 * u * u);
    }
    // reflection about 0 for samples closer than `reach` to the origin
    auto refl_end = std::upper_bound(xs.begin(), xs.end(), reach - x);
    for (auto it = xs.begin(); it != refl_end; ++it) {
      const double u = (x + *it) / h;
      acc += std::exp(-0.5 * u * u);
    }
    out.density[g] = acc * norm;
  }
  const double mass = trapezoid(out.grid, out.density);
  if (mass > 0)
    for (auto& v : out.density) v /= mass;
  return out;
}

// Integrated absolute difference between target and model on the target grid.
inline double fit_error_sb(const KernelDensity& target, const FittedDensity& model) {
  std::vector<double> diff(target.grid.size());
  for (std::size_t i = 0; i < diff.size(); ++i)
    diff[i] = std::abs(target.density[i] - density_at(model, target.grid[i]));
  return std::clamp(trapezoid(target.grid, diff), 0.0, 2.0);
}

}  // namespace burstprof
