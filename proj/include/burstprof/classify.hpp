#pragma once

// Logistic regression on domain features.
//
//   logit(q_i) = mu_i = b_0 + sum_l b_l x_{i,l}
//
// Fitted by iteratively re-weighted least squares: each step solves the
// weighted least-squares problem (sqrt(W) X) delta = (y - q) / sqrt(w) by
// Householder QR, with step halving when the deviance rises. Standard errors
// come from the inverse Fisher information X'WX at the estimate and p-values
// from two-sided Wald z-tests.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "burstprof/error.hpp"
#include "burstprof/featex.hpp"
#include "burstprof/random.hpp"
#include "burstprof/trace.hpp"

namespace burstprof {

inline constexpr std::string_view kInterceptName = "(intercept)";

// Covariates without the intercept column, which is implicit.
struct DesignMatrix {
  std::vector<std::string> columns;
  std::vector<std::string> row_names;
  Eigen::MatrixXd x;  // rows x columns
  Eigen::VectorXd y;  // 0/1

  std::size_t rows() const { return static_cast<std::size_t>(x.rows()); }

  void validate() const {
    if (static_cast<std::size_t>(x.cols()) != columns.size()) throw ConfigError("column names do not match matrix");
    if (x.rows() != y.size()) throw ConfigError("label count does not match row count");
    if (!row_names.empty() && row_names.size() != rows()) throw ConfigError("row names do not match row count");
    std::size_t pos = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (y[i] != 0.0 && y[i] != 1.0) throw ConfigError("labels must be 0 or 1");
      pos += y[i] == 1.0;
    }
    if (pos == 0 || pos == rows()) throw ConfigError("need at least one row of each class");
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      if (!x.col(c).allFinite()) throw ConfigError("missing value in column '" + columns[c] + "'");
  }

  DesignMatrix select(std::span<const std::string> names) const {
    DesignMatrix d;
    d.columns.assign(names.begin(), names.end());
    d.row_names = row_names;
    d.y = y;
    d.x.resize(x.rows(), static_cast<Eigen::Index>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) d.x.col(j) = x.col(column(names[j]));
    return d;
  }

  Eigen::Index column(std::string_view name) const {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw ConfigError("design has no column '" + std::string(name) + "'");
    return it - columns.begin();
  }
};

// Rows are the labeled domains present in the table, in table order.
inline DesignMatrix build_design(const FeatureTable& table, const std::map<std::string, DomainLabel>& labels,
                                 std::span<const std::string> columns) {
  std::vector<std::size_t> idx;
  for (const auto& c : columns) idx.push_back(table.column(c));
  DesignMatrix d;
  d.columns.assign(columns.begin(), columns.end());
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < table.domains.size(); ++r)
    if (labels.count(table.domains[r])) rows.push_back(r);
  d.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(idx.size()));
  d.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    d.row_names.push_back(table.domains[r]);
    d.y[i] = labels.at(table.domains[r]) == DomainLabel::Representative ? 1.0 : 0.0;
    for (std::size_t j = 0; j < idx.size(); ++j) d.x(i, j) = table.rows[r][idx[j]];
  }
  return d;
}

struct LogisticModel {
  std::vector<std::string> columns;  // covariates; coefficient 0 is the intercept
  std::vector<double> beta;
  std::vector<double> std_errors;
  std::vector<double> p_values;
  bool converged = false;
  int iterations = 0;
  double deviance = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  std::size_t n = 0;
  double h = 0.5;
  bool standardized = false;
  std::vector<double> center;  // per covariate; empty unless standardized
  std::vector<double> scale;
  std::vector<double> deviance_history;

  std::size_t coefficient_count() const { return beta.size(); }

  // Covariate names with the intercept first, aligned with beta.
  std::vector<std::string> coefficient_names() const {
    std::vector<std::string> n{std::string(kInterceptName)};
    n.insert(n.end(), columns.begin(), columns.end());
    return n;
  }

  double coefficient(std::string_view name) const {
    if (name == kInterceptName) return beta.at(0);
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw ConfigError("model has no column '" + std::string(name) + "'");
    return beta.at(static_cast<std::size_t>(it - columns.begin()) + 1);
  }

  friend bool operator==(const LogisticModel&, const LogisticModel&) = default;
};

struct IrwlsOptions {
  double tolerance = 1e-8;  // on max |delta beta|
  int max_iterations = 100;
  bool standardize = false;
  double h = 0.5;
};

namespace detail {

// log(1 + e^x) without overflow
inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double logistic(double mu) {
  return mu >= 0 ? 1.0 / (1.0 + std::exp(-mu)) : std::exp(mu) / (1.0 + std::exp(mu));
}

inline double bernoulli_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    dev += y[i] == 1.0 ? softplus(-eta[i]) : softplus(eta[i]);
  return 2.0 * dev;
}

inline Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd a(x.rows(), x.cols() + 1);
  a.col(0).setOnes();
  a.rightCols(x.cols()) = x;
  return a;
}

// Name of the first column (intercept included) that lies in the span of
// the preceding ones, or empty when the design has full column rank.
inline std::string dependent_column(const Eigen::MatrixXd& a, const std::vector<std::string>& names) {
  const double tol = 1e-10;
  for (Eigen::Index j = 1; j <= a.cols(); ++j) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a.leftCols(j));
    qr.setThreshold(tol);
    if (qr.rank() < j) return names[static_cast<std::size_t>(j - 1)];
  }
  return {};
}

}  // namespace detail

inline LogisticModel irwls_fit(const DesignMatrix& design, const IrwlsOptions& opt = {}) {
  design.validate();
  const Eigen::Index n = design.x.rows();
  const Eigen::Index p = design.x.cols() + 1;

  LogisticModel m;
  m.columns = design.columns;
  m.n = static_cast<std::size_t>(n);
  m.h = opt.h;
  m.standardized = opt.standardize;

  Eigen::MatrixXd x = design.x;
  if (opt.standardize) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double mean = x.col(c).mean();
      const double sd = std::sqrt((x.col(c).array() - mean).square().sum() / std::max<double>(1.0, n - 1.0));
      const double s = sd > 0 ? sd : 1.0;
      x.col(c) = (x.col(c).array() - mean) / s;
      m.center.push_back(mean);
      m.scale.push_back(s);
    }
  }
  const Eigen::MatrixXd a = detail::with_intercept(x);
  const auto names = m.coefficient_names();
  if (n < p) throw RankDeficiencyError(names[static_cast<std::size_t>(n)]);
  if (auto dep = detail::dependent_column(a, names); !dep.empty()) throw RankDeficiencyError(dep);

  // Column blamed for separation: largest coefficient relative to spread.
  auto culprit = [&](const Eigen::VectorXd& b) {
    Eigen::Index best = 0;
    double worst = -1.0;
    for (Eigen::Index c = 1; c < p; ++c) {
      const auto col = a.col(c);
      const double spread = std::sqrt((col.array() - col.mean()).square().mean());
      const double eff = std::abs(b[c]) * spread;
      if (eff > worst) worst = eff, best = c;
    }
    return names[static_cast<std::size_t>(best)];
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = a * beta;
  double dev = detail::bernoulli_deviance(design.y, eta);
  m.deviance_history.push_back(dev);
  // Separation drives |mu| without bound: deviance collapses to zero and
  // weights underflow long before max_iterations.
  constexpr double kMinWeight = 1e-300;
  constexpr double kMinDeviance = 1e-8;
  auto separated = [&](const Eigen::VectorXd& b) {
    return SeparationError(p > 1 ? culprit(b) : std::string(kInterceptName));
  };

  for (int it = 1; it <= opt.max_iterations; ++it) {
    Eigen::VectorXd sw(n), r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double q = detail::logistic(eta[i]);
      const double w = q * (1.0 - q);
      if (w < kMinWeight) throw separated(beta);
      sw[i] = std::sqrt(w);
      r[i] = (design.y[i] - q) / sw[i];
    }
    const Eigen::MatrixXd wa = sw.asDiagonal() * a;
    Eigen::VectorXd delta = wa.householderQr().solve(r);

    Eigen::VectorXd next = beta + delta;
    Eigen::VectorXd next_eta = a * next;
    double next_dev = detail::bernoulli_deviance(design.y, next_eta);
    for (int halve = 0; halve < 30 && !(next_dev <= dev); ++halve) {
      delta *= 0.5;
      next = beta + delta;
      next_eta = a * next;
      next_dev = detail::bernoulli_deviance(design.y, next_eta);
    }
    if (!(next_dev <= dev)) {
      next = beta;
      next_eta = eta;
      next_dev = dev;
      delta.setZero();
    }
    beta = std::move(next);
    eta = std::move(next_eta);
    dev = next_dev;
    m.deviance_history.push_back(dev);
    m.iterations = it;
    if (dev < kMinDeviance) throw separated(beta);
    if (delta.cwiseAbs().maxCoeff() < opt.tolerance) {
      m.converged = true;
      break;
    }
  }
  if (!m.converged || dev < kMinDeviance) throw separated(beta);

  // Fisher information at the estimate.
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double q = detail::logistic(eta[i]);
    w[i] = q * (1.0 - q);
    if (w[i] < kMinWeight) throw separated(beta);
  }
  const Eigen::MatrixXd info = a.transpose() * w.asDiagonal() * a;
  const Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));

  m.beta.assign(beta.data(), beta.data() + p);
  for (Eigen::Index c = 0; c < p; ++c) {
    const double se = std::sqrt(cov(c, c));
    m.std_errors.push_back(se);
    m.p_values.push_back(std::erfc(std::abs(beta[c] / se) / std::numbers::sqrt2));
  }
  m.deviance = dev;
  m.aic = dev + 2.0 * static_cast<double>(p);
  m.bic = dev + static_cast<double>(p) * std::log(static_cast<double>(n));
  return m;
}

inline double linear_predictor(const LogisticModel& m, std::span<const double> features) {
  if (features.size() != m.columns.size())
    throw ConfigError("expected " + std::to_string(m.columns.size()) + " features, got " +
                      std::to_string(features.size()));
  double mu = m.beta.at(0);
  for (std::size_t j = 0; j < features.size(); ++j) {
    double v = features[j];
    if (m.standardized) v = (v - m.center[j]) / m.scale[j];
    mu += m.beta[j + 1] * v;
  }
  return mu;
}

inline double predict(const LogisticModel& m, std::span<const double> features) {
  return detail::logistic(linear_predictor(m, features));
}

// Features looked up by name from a feature table row.
inline double predict(const LogisticModel& m, const FeatureTable& table, std::size_t row) {
  std::vector<double> v;
  v.reserve(m.columns.size());
  for (const auto& c : m.columns) v.push_back(table.rows.at(row)[table.column(c)]);
  return predict(m, v);
}

inline DomainLabel classify_probability(double q, double h) {
  return q >= h ? DomainLabel::Representative : DomainLabel::NonRepresentative;
}

inline DomainLabel classify(const LogisticModel& m, std::span<const double> features) {
  return classify_probability(predict(m, features), m.h);
}

struct StepwiseResult {
  LogisticModel model;
  std::vector<std::string> selected;  // in order of entry
  std::vector<double> aic_path;       // AIC after each accepted step, starting intercept-only
  std::vector<std::string> warnings;
};

// Greedy forward selection by AIC starting from the intercept-only model.
inline StepwiseResult stepwise_select(const DesignMatrix& candidates, const IrwlsOptions& opt = {},
                                      std::size_t max_terms = std::numeric_limits<std::size_t>::max()) {
  StepwiseResult res;
  std::vector<std::string> pool;
  for (Eigen::Index c = 0; c < candidates.x.cols(); ++c) {
    if (candidates.x.col(c).allFinite()) pool.push_back(candidates.columns[c]);
    else res.warnings.push_back("skipped column '" + candidates.columns[c] + "': missing values");
  }

  res.model = irwls_fit(candidates.select(res.selected), opt);
  res.aic_path.push_back(res.model.aic);
  while (!pool.empty() && res.selected.size() < max_terms) {
    double best_aic = res.model.aic;
    std::string best;
    LogisticModel best_model;
    std::vector<std::string> failed;
    for (const auto& col : pool) {
      auto trial = res.selected;
      trial.push_back(col);
      try {
        auto fit = irwls_fit(candidates.select(trial), opt);
        if (fit.aic < best_aic) {
          best_aic = fit.aic;
          best = col;
          best_model = std::move(fit);
        }
      } catch (const SeparationError& e) {
        res.warnings.push_back("skipped column '" + col + "': " + e.what());
        failed.push_back(col);
      } catch (const RankDeficiencyError& e) {
        res.warnings.push_back("skipped column '" + col + "': " + e.what());
        failed.push_back(col);
      }
    }
    std::erase_if(pool, [&](const std::string& c) {
      return c == best || std::find(failed.begin(), failed.end(), c) != failed.end();
    });
    if (best.empty()) break;
    res.selected.push_back(best);
    res.model = std::move(best_model);
    res.aic_path.push_back(res.model.aic);
  }
  return res;
}

// Stratified half split of labeled domains: each class is shuffled and its
// first ceil(n/2) members go to training.
struct LabelSplit {
  std::map<std::string, DomainLabel> train;
  std::map<std::string, DomainLabel> holdout;
};

inline LabelSplit split_labels(const std::map<std::string, DomainLabel>& labels, std::uint64_t seed) {
  LabelSplit s;
  Rng rng(seed);
  for (auto cls : {DomainLabel::Representative, DomainLabel::NonRepresentative}) {
    std::vector<std::string> ds;
    for (const auto& [d, l] : labels)
      if (l == cls) ds.push_back(d);
    rng.shuffle(ds.begin(), ds.end());
    const std::size_t half = (ds.size() + 1) / 2;
    for (std::size_t i = 0; i < ds.size(); ++i) (i < half ? s.train : s.holdout).emplace(ds[i], cls);
  }
  return s;
}

// JSON persistence. Non-finite numbers are written as null and read back as NaN.
namespace detail {

inline nlohmann::json number_json(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline nlohmann::json numbers_json(const std::vector<double>& v) {
  auto a = nlohmann::json::array();
  for (double x : v) a.push_back(number_json(x));
  return a;
}

inline double json_number(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline std::vector<double> json_numbers(const nlohmann::json& j) {
  std::vector<double> v;
  for (const auto& x : j) v.push_back(json_number(x));
  return v;
}

}  // namespace detail

inline nlohmann::json to_json(const LogisticModel& m) {
  using detail::number_json;
  using detail::numbers_json;
  return {{"columns", m.columns},
          {"beta", numbers_json(m.beta)},
          {"std_errors", numbers_json(m.std_errors)},
          {"p_values", numbers_json(m.p_values)},
          {"converged", m.converged},
          {"iterations", m.iterations},
          {"deviance", number_json(m.deviance)},
          {"aic", number_json(m.aic)},
          {"bic", number_json(m.bic)},
          {"n", m.n},
          {"h", number_json(m.h)},
          {"standardized", m.standardized},
          {"center", numbers_json(m.center)},
          {"scale", numbers_json(m.scale)},
          {"deviance_history", numbers_json(m.deviance_history)}};
}

inline LogisticModel model_from_json(const nlohmann::json& j) {
  using detail::json_number;
  using detail::json_numbers;
  try {
    LogisticModel m;
    m.columns = j.at("columns").get<std::vector<std::string>>();
    m.beta = json_numbers(j.at("beta"));
    m.std_errors = json_numbers(j.at("std_errors"));
    m.p_values = json_numbers(j.at("p_values"));
    m.converged = j.at("converged").get<bool>();
    m.iterations = j.at("iterations").get<int>();
    m.deviance = json_number(j.at("deviance"));
    m.aic = json_number(j.at("aic"));
    m.bic = json_number(j.at("bic"));
    m.n = j.at("n").get<std::size_t>();
    m.h = json_number(j.at("h"));
    m.standardized = j.at("standardized").get<bool>();
    m.center = json_numbers(j.at("center"));
    m.scale = json_numbers(j.at("scale"));
    m.deviance_history = json_numbers(j.value("deviance_history", nlohmann::json::array()));
    if (m.beta.size() != m.columns.size() + 1) throw ConfigError("model has wrong number of coefficients");
    if (m.standardized && (m.center.size() != m.columns.size() || m.scale.size() != m.columns.size()))
      throw ConfigError("model standardization does not match its columns");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("<model>", e.what());
  }
}

inline void save_model(const LogisticModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot open for writing");
  out << to_json(m).dump(2) << '\n';
  if (!out) throw IoError(path, "write failed");
}

inline LogisticModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open model file");
  try {
    return model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path, e.what());
  }
}

}  // namespace burstprof
