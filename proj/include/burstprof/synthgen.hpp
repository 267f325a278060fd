#pragma once

// Synthetic multi-user traces with known burst boundaries and domain labels.
//
// Gap law: gaps inside a burst are Exponential(within_rate) truncated to
// [0, boundary); gaps between bursts are Pareto(boundary, out_tail_shape).
// Any threshold strictly between the two recovers the bursts exactly.
//
// Burst content:
//   action burst      one representative domain whose records form a block,
//                     plus 1..max_noise_domains noise domains. The block opens
//                     the burst with a per-domain probability whose mean is
//                     p_first_representative; otherwise it starts at a uniform
//                     later position.
//   background burst  a noise "leader" block, usually followed by one noise
//                     companion block (share p_background).
// Records beyond one per member are spread by per-domain multiplicity. A small
// crossover share of each class is generated in the other class's role.
// Popularity, multiplicity, lead tendency and size scale are drawn once from
// world_seed so several trace sets can share the same domain population.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "burstprof/error.hpp"
#include "burstprof/random.hpp"
#include "burstprof/trace.hpp"

namespace burstprof {

struct CountRange {
  std::int64_t min = 1;
  std::int64_t max = 1;
};

struct RealRange {
  double min = 1;
  double max = 1;
};
using ByteRange = RealRange;

struct SynthConfig {
  std::size_t n_users = 50;
  CountRange bursts_per_user{800, 900};
  double within_rate = 5.0;     // 1/s
  double out_tail_shape = 1.5;  // Pareto alpha between bursts
  double boundary = 5.0;        // d_true, seconds
  std::vector<std::string> representative_domains;
  std::vector<std::string> noise_domains;
  double p_first_representative = 0.8;
  CountRange records_per_burst{2, 12};
  double p_background = 0.3;           // share of noise-only bursts
  double p_background_alone = 0.05;    // noise-only burst has a single domain
  double p_noise_leader = 0.3;         // share of noise domains that open noise-only bursts
  std::optional<CountRange> background_records;  // unset: same as records_per_burst
  double p_crossover = 0.05;           // share of each class generated in the other class's role
  // per-domain weight for the extra records of a burst, by role
  RealRange rep_multiplicity{2.0, 8.0};
  RealRange noise_multiplicity{0.5, 3.0};
  std::int64_t max_noise_domains = 6;  // per action burst
  double popularity_skew = 1.0;        // Zipf exponent over domains
  // per-class ranges for a domain's median record size, in bytes
  ByteRange rep_upload{400, 4000};
  ByteRange rep_download{2000, 200000};
  ByteRange noise_upload{300, 3000};
  ByteRange noise_download{500, 150000};
  double size_jitter = 0.6;  // lognormal sigma around the domain median
  double start_time = 0.0;   // seconds; users start within one hour after this
  std::uint64_t seed = 1;
  std::uint64_t world_seed = 0;  // 0 = use seed

  std::uint64_t effective_world_seed() const { return world_seed ? world_seed : seed; }

  void validate() const {
    if (representative_domains.empty() || noise_domains.empty())
      throw ConfigError("synth: representative and noise domain lists must be non-empty");
    auto check_range = [](const CountRange& r, std::int64_t lo, const char* name) {
      if (r.min < lo || r.max < r.min) throw ConfigError(std::string("synth: bad range ") + name);
    };
    check_range(bursts_per_user, 1, "bursts_per_user");
    check_range(records_per_burst, 1, "records_per_burst");
    if (background_records) check_range(*background_records, 1, "background_records");
    for (double p : {p_first_representative, p_background, p_background_alone, p_crossover, p_noise_leader})
      if (!(p >= 0 && p <= 1)) throw ConfigError("synth: probabilities must lie in [0,1]");
    if (!(within_rate > 0 && out_tail_shape > 0 && boundary > 0))
      throw ConfigError("synth: rates, shape and boundary must be positive");
    if (max_noise_domains < 1) throw ConfigError("synth: max_noise_domains must be >= 1");
    for (const auto* r : {&rep_upload, &rep_download, &noise_upload, &noise_download, &rep_multiplicity,
                          &noise_multiplicity})
      if (!(r->min > 0 && r->max >= r->min)) throw ConfigError("synth: bad range");
  }
};

struct LabeledTrace {
  UserTrace trace;
  std::vector<std::size_t> burst_ids;  // one per record, non-decreasing
  std::map<std::string, DomainLabel> labels;
};

// Neutral host names, so that the name carries no hint of the class.
inline std::vector<std::string> make_domain_names(std::size_t count, std::uint64_t seed,
                                                  std::uint64_t stream) {
  std::vector<std::string> names;
  names.reserve(count);
  char buf[32];
  for (std::size_t i = 0; i < count; ++i) {
    const auto h = derive_seed(seed ^ (stream << 32), i);
    std::snprintf(buf, sizeof buf, "s%08llx.example", static_cast<unsigned long long>(h & 0xffffffffULL));
    names.emplace_back(buf);
  }
  return names;
}

// Within-burst rate that makes the generated gap mixture continuous at the
// boundary, i.e. an exact member of the EXP_PRT family. Uses the expected
// share of within-burst gaps implied by records_per_burst.
inline double continuous_within_rate(const SynthConfig& cfg) {
  const double mean_size = 0.5 * static_cast<double>(cfg.records_per_burst.min + cfg.records_per_burst.max);
  if (mean_size <= 1.0) throw ConfigError("synth: bursts need more than one record on average");
  const double within_share = (mean_size - 1.0) / mean_size;
  const double target = (1.0 - within_share) * cfg.out_tail_shape / within_share;
  if (!(target < 1.0)) throw ConfigError("synth: tail too heavy for a continuous EXP_PRT mixture");
  // u / (e^u - 1) is decreasing from 1 to 0; bisect for u = rate * boundary
  double lo = 1e-12, hi = 800.0;
  for (int i = 0; i < 200; ++i) {
    const double u = 0.5 * (lo + hi);
    (u / std::expm1(u) > target ? lo : hi) = u;
  }
  return 0.5 * (lo + hi) / cfg.boundary;
}

inline SynthConfig default_synth_config(std::uint64_t seed, std::size_t n_rep = 150,
                                        std::size_t n_noise = 250) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.representative_domains = make_domain_names(n_rep, 0x5eed, 1);
  cfg.noise_domains = make_domain_names(n_noise, 0x5eed, 2);
  return cfg;
}

namespace detail {

struct DomainProfile {
  double popularity = 1.0;    // selection weight
  double multiplicity = 1.0;  // relative weight for extra records in a burst
  double companion = 1.0;     // noise: weight for joining a burst it does not open
  double lead = 1.0;          // noise: weight for opening a background burst (0 for non-leaders);
                              // representative: probability of opening its burst
  double upload_median = 1.0;
  double download_median = 1.0;
};

// Domains grouped by generative role. A crossover domain keeps its label but
// sits in the other role's pool.
struct World {
  std::vector<std::string> rep_names, noise_names;
  std::vector<DomainProfile> rep, noise;
  std::vector<double> rep_cum, noise_cum, lead_cum;
};

inline double log_uniform(Rng& rng, const ByteRange& r) {
  return std::exp(rng.uniform(std::log(r.min), std::log(r.max)));
}

inline std::vector<double> cumulative(const std::vector<DomainProfile>& ds, double DomainProfile::*field) {
  std::vector<double> c(ds.size());
  double acc = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) c[i] = acc += ds[i].*field;
  return c;
}

inline World make_world(const SynthConfig& cfg) {
  Rng rng(derive_seed(cfg.effective_world_seed(), 0xd0a1));
  World w;
  // Beta(a, 1) with mean p_first_representative, sampled as U^(1/a)
  auto rep_lead = [&](Rng& r) {
    const double p = cfg.p_first_representative;
    if (p <= 0.0 || p >= 1.0) return p;
    return std::pow(r.uniform(), (1.0 - p) / p);
  };
  auto build = [&](std::size_t n, bool rep) {
    std::vector<std::size_t> rank(n);
    for (std::size_t i = 0; i < n; ++i) rank[i] = i + 1;
    rng.shuffle(rank.begin(), rank.end());
    std::vector<DomainProfile> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto& d = out[i];
      d.popularity = std::pow(static_cast<double>(rank[i]), -cfg.popularity_skew);
      const auto& mult = rep ? cfg.rep_multiplicity : cfg.noise_multiplicity;
      d.multiplicity = log_uniform(rng, mult);
      d.lead = rep ? rep_lead(rng) : (rng.bernoulli(cfg.p_noise_leader) ? d.popularity : 0.0);
      d.companion = !rep && d.lead > 0 ? 0.0 : d.popularity;
      d.upload_median = log_uniform(rng, rep ? cfg.rep_upload : cfg.noise_upload);
      d.download_median = log_uniform(rng, rep ? cfg.rep_download : cfg.noise_download);
    }
    return out;
  };
  auto reps = cfg.representative_domains;
  auto noise = cfg.noise_domains;
  rng.shuffle(reps.begin(), reps.end());
  rng.shuffle(noise.begin(), noise.end());
  const auto rep_cross = static_cast<std::size_t>(std::llround(cfg.p_crossover * static_cast<double>(reps.size())));
  const auto noise_cross = static_cast<std::size_t>(std::llround(cfg.p_crossover * static_cast<double>(noise.size())));
  w.rep_names.assign(reps.begin() + static_cast<std::ptrdiff_t>(rep_cross), reps.end());
  w.rep_names.insert(w.rep_names.end(), noise.begin(), noise.begin() + static_cast<std::ptrdiff_t>(noise_cross));
  w.noise_names.assign(noise.begin() + static_cast<std::ptrdiff_t>(noise_cross), noise.end());
  w.noise_names.insert(w.noise_names.end(), reps.begin(), reps.begin() + static_cast<std::ptrdiff_t>(rep_cross));
  if (w.rep_names.empty() || w.noise_names.empty()) throw ConfigError("synth: crossover empties a role pool");
  w.rep = build(w.rep_names.size(), true);
  w.noise = build(w.noise_names.size(), false);
  w.rep_cum = cumulative(w.rep, &DomainProfile::popularity);
  w.noise_cum = cumulative(w.noise, &DomainProfile::companion);
  w.lead_cum = cumulative(w.noise, &DomainProfile::lead);
  if (!(w.noise_cum.back() > 0)) w.noise_cum = w.lead_cum;
  if (!(w.lead_cum.back() > 0)) w.lead_cum = w.noise_cum;
  return w;
}

struct Slot {
  bool rep;
  std::size_t domain;
};

// Draws `count` distinct noise domains by popularity (count <= pool size).
inline std::vector<std::size_t> draw_distinct(Rng& rng, const std::vector<double>& cum, std::size_t count,
                                              std::vector<std::size_t> already = {}) {
  std::vector<std::size_t> out = std::move(already);
  std::size_t drawable = out.size();
  for (std::size_t i = 0; i < cum.size(); ++i)
    if (cum[i] > (i ? cum[i - 1] : 0.0) && std::find(out.begin(), out.end(), i) == out.end()) ++drawable;
  count = std::min(count + out.size(), drawable);
  while (out.size() < count) {
    auto i = rng.weighted_index(cum);
    if (std::find(out.begin(), out.end(), i) == out.end()) out.push_back(i);
  }
  return out;
}

// Record counts per member: one each, the rest spread by multiplicity.
inline std::vector<std::size_t> allocate_records(Rng& rng, std::size_t n, const std::vector<double>& weights) {
  std::vector<std::size_t> count(weights.size(), 1);
  std::vector<double> cum(weights.size());
  double acc = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) cum[i] = acc += weights[i];
  for (std::size_t extra = weights.size(); extra < n; ++extra) ++count[rng.weighted_index(cum)];
  return count;
}

inline std::vector<Slot> make_burst(Rng& rng, const SynthConfig& cfg, const World& w) {
  const bool background = rng.bernoulli(cfg.p_background);
  const auto& range = background && cfg.background_records ? *cfg.background_records : cfg.records_per_burst;
  const auto n = static_cast<std::size_t>(rng.uniform_int(range.min, range.max));
  auto block = [](std::vector<Slot>& out, Slot s, std::size_t count) { out.insert(out.end(), count, s); };

  if (background) {
    // noise-only burst: the leader's records first, then its companion's
    const std::size_t unique = n >= 2 && !rng.bernoulli(cfg.p_background_alone) ? 2 : 1;
    auto doms = draw_distinct(rng, w.noise_cum, unique - 1, {rng.weighted_index(w.lead_cum)});
    std::vector<double> weights;
    for (auto d : doms) weights.push_back(w.noise[d].multiplicity);
    const auto counts = allocate_records(rng, unique == 1 ? n : std::max<std::size_t>(n, doms.size()), weights);
    std::vector<Slot> recs;
    for (std::size_t i = 0; i < doms.size(); ++i) block(recs, {false, doms[i]}, counts[i]);
    return recs;
  }

  // action burst: one representative block plus noise records
  const std::size_t rep = rng.weighted_index(w.rep_cum);
  std::vector<std::size_t> noise;
  if (n >= 2) {
    const auto hi = std::min<std::int64_t>(cfg.max_noise_domains, static_cast<std::int64_t>(n) - 1);
    noise = draw_distinct(rng, w.noise_cum, static_cast<std::size_t>(rng.uniform_int(1, hi)));
  }
  std::vector<double> weights{w.rep[rep].multiplicity};
  for (auto d : noise) weights.push_back(w.noise[d].multiplicity);
  const auto counts = allocate_records(rng, std::max<std::size_t>(n, weights.size()), weights);

  std::vector<Slot> tail;
  for (std::size_t i = 0; i < noise.size(); ++i) block(tail, {false, noise[i]}, counts[i + 1]);
  rng.shuffle(tail.begin(), tail.end());

  std::vector<Slot> recs;
  if (tail.empty() || rng.bernoulli(w.rep[rep].lead)) {
    block(recs, {true, rep}, counts[0]);
    recs.insert(recs.end(), tail.begin(), tail.end());
  } else {
    // the block starts at a uniform position after the first noise record
    const auto at = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(tail.size())));
    recs.assign(tail.begin(), tail.begin() + static_cast<std::ptrdiff_t>(at));
    block(recs, {true, rep}, counts[0]);
    recs.insert(recs.end(), tail.begin() + static_cast<std::ptrdiff_t>(at), tail.end());
  }
  return recs;
}

inline std::uint64_t draw_size(Rng& rng, double median, double sigma) {
  return static_cast<std::uint64_t>(std::llround(median * std::exp(rng.normal(0.0, sigma))));
}

}  // namespace detail

inline std::vector<LabeledTrace> generate(const SynthConfig& cfg) {
  cfg.validate();
  const auto world = detail::make_world(cfg);

  std::map<std::string, DomainLabel> labels;
  for (const auto& d : cfg.representative_domains) labels[d] = DomainLabel::Representative;
  for (const auto& d : cfg.noise_domains) labels[d] = DomainLabel::NonRepresentative;

  std::vector<LabeledTrace> out;
  out.reserve(cfg.n_users);
  char buf[32];
  for (std::size_t u = 0; u < cfg.n_users; ++u) {
    Rng rng(derive_seed(cfg.seed, u));
    std::snprintf(buf, sizeof buf, "u%012llx",
                  static_cast<unsigned long long>(derive_seed(cfg.seed ^ 0xabcdefULL, u) & 0xffffffffffffULL));
    const std::string user = buf;

    const auto n_bursts = rng.uniform_int(cfg.bursts_per_user.min, cfg.bursts_per_user.max);
    std::vector<HttpRecord> recs;
    std::vector<std::size_t> ids;
    double t = cfg.start_time + rng.uniform(0.0, 3600.0);
    for (std::int64_t b = 0; b < n_bursts; ++b) {
      const auto slots = detail::make_burst(rng, cfg, world);
      for (std::size_t i = 0; i < slots.size(); ++i) {
        if (b > 0 || i > 0) {
          double next;
          if (i == 0) {
            next = t + rng.pareto(cfg.boundary, cfg.out_tail_shape);
            while (next - t < cfg.boundary) next = std::nextafter(next, HUGE_VAL);
          } else {
            next = t + rng.truncated_exponential(cfg.within_rate, cfg.boundary);
            while (next - t >= cfg.boundary) next = std::nextafter(next, 0.0);
          }
          t = next;
        }
        const auto& s = slots[i];
        const auto& prof = s.rep ? world.rep[s.domain] : world.noise[s.domain];
        HttpRecord r;
        r.user_id = user;
        r.timestamp = t;
        r.domain = s.rep ? world.rep_names[s.domain] : world.noise_names[s.domain];
        r.upload_size = detail::draw_size(rng, prof.upload_median, cfg.size_jitter);
        r.download_size = detail::draw_size(rng, prof.download_median, cfg.size_jitter);
        recs.push_back(std::move(r));
        ids.push_back(static_cast<std::size_t>(b));
      }
    }
    LabeledTrace lt;
    lt.trace = UserTrace(user, std::move(recs));
    lt.burst_ids = std::move(ids);
    for (const auto& r : lt.trace.records()) lt.labels.emplace(r.domain, labels.at(r.domain));
    out.push_back(std::move(lt));
  }
  return out;
}

// Sidecar writers: <name>.bursts and <name>.labels.
inline void write_bursts(const std::vector<LabeledTrace>& data, std::ostream& out) {
  out << "user_id,record_index,burst_id\n";
  for (const auto& lt : data)
    for (std::size_t i = 0; i < lt.burst_ids.size(); ++i)
      out << lt.trace.user_id() << ',' << i << ',' << lt.burst_ids[i] << '\n';
}

inline std::map<std::string, DomainLabel> merged_labels(const std::vector<LabeledTrace>& data) {
  std::map<std::string, DomainLabel> all;
  for (const auto& lt : data) all.insert(lt.labels.begin(), lt.labels.end());
  return all;
}

inline void write_labels(const std::map<std::string, DomainLabel>& labels, std::ostream& out) {
  out << "domain,label\n";
  for (const auto& [d, l] : labels) out << d << ',' << static_cast<int>(l) << '\n';
}

}  // namespace burstprof
