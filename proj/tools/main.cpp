// burstprof command-line front end.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "burstprof/burstseg.hpp"
#include "burstprof/classify.hpp"
#include "burstprof/distfit.hpp"
#include "burstprof/evalmetrics.hpp"
#include "burstprof/featex.hpp"
#include "burstprof/ingest.hpp"
#include "burstprof/pipeline.hpp"
#include "burstprof/report.hpp"
#include "burstprof/synthgen.hpp"

#ifndef BURSTPROF_VERSION
#define BURSTPROF_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace burstprof;
using json = nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string traces, labels, out = ".", config, model, features;
  double bin_length = 0.1;
  double p = 0.01;
  int J = 10;
  std::vector<double> h{0.5};
  std::uint64_t seed = 1;
  std::string size_unit = "kb";
  std::size_t grid_size = 2048;
  std::size_t users = 50;
  std::size_t k = 5;
  std::vector<std::string> columns{"obar_b_1", "u_b_2"};
  std::string stepwise;  // empty, record, burst or all
  bool standardize = false;
  json synth = json::object();  // synth overrides, config file only
};

BurstConfig burst_config(const Options& o) {
  BurstConfig c;
  c.bin_length = o.bin_length;
  c.p = o.p;
  c.run_length = o.J;
  c.validate();
  return c;
}

SizeUnit size_unit(const Options& o) {
  if (o.size_unit == "kb") return SizeUnit::Kilobytes;
  if (o.size_unit == "bytes") return SizeUnit::Bytes;
  throw UsageError("--size-unit must be bytes or kb");
}

json effective_config(const Options& o) {
  return {{"traces", o.traces},       {"labels", o.labels},     {"out", o.out},
          {"model", o.model},         {"features", o.features}, {"bin_length", o.bin_length},
          {"p", o.p},                 {"J", o.J},               {"h", o.h},
          {"seed", o.seed},           {"size_unit", o.size_unit}, {"grid_size", o.grid_size},
          {"users", o.users},         {"k", o.k},               {"columns", o.columns},
          {"stepwise", o.stepwise},   {"standardize", o.standardize}, {"synth", o.synth}};
}

// Tracks every artifact written so run.json can list checksums.
class Run {
 public:
  Run(std::string command, const Options& opt) : command_(std::move(command)), opt_(opt) {
    fs::create_directories(opt_.out);
  }

  std::string path(const std::string& name) const { return (fs::path(opt_.out) / name).string(); }

  void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
    const auto p = path(name);
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError(p, "cannot open for writing");
    body(out);
    out.flush();
    if (!out) throw IoError(p, "write failed");
    artifacts_.push_back(name);
  }

  void finish() {
    json manifest;
    manifest["tool"] = "burstprof";
    manifest["version"] = BURSTPROF_VERSION;
    manifest["command"] = command_;
    manifest["seed"] = opt_.seed;
    manifest["config"] = effective_config(opt_);
    json sums = json::object();
    for (const auto& a : artifacts_) sums[a] = {{"fnv1a64", fnv1a64_file(path(a))}, {"bytes", fs::file_size(path(a))}};
    manifest["artifacts"] = sums;
    const auto p = path("run.json");
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError(p, "cannot open for writing");
    out << manifest.dump(2) << '\n';
  }

 private:
  std::string command_;
  const Options& opt_;
  std::vector<std::string> artifacts_;
};

std::string require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string("missing required ") + flag);
  return value;
}

std::vector<UserTrace> load_traces(const Options& o) {
  return parse_traces(require(o.traces, "--traces")).traces;
}

FeatureTable load_features(const Options& o, const Run& run) {
  const auto p = o.features.empty() ? run.path("features.csv") : o.features;
  std::ifstream in(p);
  if (!in) throw IoError(p, "cannot open features file");
  return read_feature_table(in, p);
}

LogisticModel load_model_for(const Options& o, const Run& run) {
  return load_model(o.model.empty() ? run.path("model.json") : o.model);
}

void write_labels_file(Run& run, const std::string& name, const std::map<std::string, DomainLabel>& labels) {
  run.write(name, [&](std::ostream& out) { write_labels(labels, out); });
}

// ---- commands -----------------------------------------------------------

SynthConfig synth_config(const Options& o) {
  const auto& s = o.synth;
  auto cfg = default_synth_config(o.seed, s.value("n_representative", std::size_t{150}),
                                  s.value("n_noise", std::size_t{250}));
  cfg.n_users = o.users;
  cfg.world_seed = s.value("world_seed", std::uint64_t{0});
  cfg.within_rate = s.value("within_rate", cfg.within_rate);
  cfg.out_tail_shape = s.value("out_tail_shape", cfg.out_tail_shape);
  cfg.boundary = s.value("boundary", cfg.boundary);
  cfg.p_first_representative = s.value("p_first_representative", cfg.p_first_representative);
  cfg.bursts_per_user.min = s.value("bursts_min", cfg.bursts_per_user.min);
  cfg.bursts_per_user.max = s.value("bursts_max", cfg.bursts_per_user.max);
  cfg.records_per_burst.min = s.value("records_min", cfg.records_per_burst.min);
  cfg.records_per_burst.max = s.value("records_max", cfg.records_per_burst.max);
  return cfg;
}

std::map<std::string, DomainLabel> do_synth(Run& run, const Options& o) {
  const auto data = generate(synth_config(o));
  std::vector<UserTrace> traces;
  for (const auto& lt : data) traces.push_back(lt.trace);
  run.write("traces.csv", [&](std::ostream& out) { write_traces(traces, out); });
  run.write("traces.bursts", [&](std::ostream& out) { write_bursts(data, out); });
  auto labels = merged_labels(data);
  write_labels_file(run, "traces.labels", labels);
  return labels;
}

std::vector<UserTrace> do_ingest(Run& run, const Options& o) {
  auto res = parse_traces(require(o.traces, "--traces"));
  run.write("traces.csv", [&](std::ostream& out) { write_traces(res.traces, out); });
  run.write("rejected.csv", [&](std::ostream& out) {
    out << "line,reason\n";
    for (const auto& r : res.rejected) out << r.line << ',' << csv::quote(r.reason) << '\n';
  });
  return std::move(res.traces);
}

void do_fitdist(Run& run, const Options& o) {
  const auto traces = load_traces(o);
  GridSpec grid;
  grid.size = o.grid_size;
  run.write("fit_report.csv", [&](std::ostream& out) {
    out << kFitReportHeader << '\n';
    for (const auto& t : traces) {
      const auto gaps = interarrivals(t).gaps;
      auto sel = select_family(gaps);
      for (const auto& w : sel.warnings) std::cerr << "warning: user " << t.user_id() << ": " << w << '\n';
      if (sel.ranked.empty()) continue;
      const auto target = kde(gaps, grid);
      for (const auto& r : sel.ranked) write_fit_report_row(out, t.user_id(), r.model, fit_error_sb(target, r.model));
    }
  });
}

void write_thresholds(Run& run, const std::vector<UserThreshold>& th) {
  run.write("thresholds.csv", [&](std::ostream& out) {
    out << "user_id,tau_star,fallback\n";
    for (const auto& t : th)
      out << csv::quote(t.user_id) << ',' << csv::format_double(t.tau_star) << ',' << (t.fallback ? 1 : 0) << '\n';
  });
}

void write_decomposition(Run& run, std::span<const UserTrace> traces, const TraceAnalysis& a) {
  run.write("bursts.csv", [&](std::ostream& out) {
    out << "user_id,record_index,burst_id,tau_star\n";
    for (std::size_t u = 0; u < traces.size(); ++u) {
      const auto ids = burst_ids(a.bursts[u], traces[u].size());
      const auto tau = csv::format_double(a.thresholds[u].tau_star);
      for (std::size_t i = 0; i < ids.size(); ++i)
        out << csv::quote(traces[u].user_id()) << ',' << i << ',' << ids[i] << ',' << tau << '\n';
    }
  });
}

std::vector<std::string> candidate_columns(const std::string& set) {
  std::vector<std::string> cols;
  for (const auto& n : feature_names()) {
    const bool rec = is_record_feature(n);
    if (set == "all" || (set == "record" && rec) || (set == "burst" && !rec)) cols.push_back(n);
  }
  if (cols.empty()) throw UsageError("--stepwise must be record, burst or all");
  return cols;
}

LogisticModel do_train(Run& run, const Options& o, const FeatureTable& table,
                       const std::map<std::string, DomainLabel>& labels) {
  const auto split = split_labels(labels, o.seed);
  write_labels_file(run, "train_labels.csv", split.train);
  write_labels_file(run, "holdout_labels.csv", split.holdout);
  IrwlsOptions fit;
  fit.standardize = o.standardize;
  fit.h = o.h.empty() ? 0.5 : o.h.front();
  LogisticModel model;
  if (o.stepwise.empty()) {
    model = irwls_fit(build_design(table, split.train, o.columns), fit);
  } else {
    const auto cols = candidate_columns(o.stepwise);
    auto res = stepwise_select(build_design(table, split.train, cols), fit);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
    model = std::move(res.model);
  }
  run.write("model.json", [&](std::ostream& out) { out << to_json(model).dump(2) << '\n'; });
  return model;
}

// Labeled rows of the table with the model's probability.
void scored(const FeatureTable& table, const LogisticModel& model, const std::map<std::string, DomainLabel>& labels,
            std::vector<int>& y, std::vector<double>& q) {
  for (std::size_t r = 0; r < table.domains.size(); ++r) {
    auto it = labels.find(table.domains[r]);
    if (it == labels.end()) continue;
    y.push_back(it->second == DomainLabel::Representative ? 1 : 0);
    q.push_back(predict(model, table, r));
  }
  if (y.empty()) throw ConfigError("no labeled domain appears in the feature table");
}

void do_evaluate(Run& run, const Options& o, const FeatureTable& table, const LogisticModel& model,
                 const std::map<std::string, DomainLabel>& labels) {
  std::vector<int> y;
  std::vector<double> q;
  scored(table, model, labels, y, q);
  run.write("metrics.csv", [&](std::ostream& out) {
    write_metrics_header(out);
    for (double h : o.h) write_metrics_row(h, tradeoff_metrics(confusion(y, q, h)), out);
  });
  run.write("boundaries.csv", [&](std::ostream& out) {
    out << "rule,h,score\n";
    const auto acc = best_accuracy_threshold(y, q);
    out << "max_accuracy," << csv::format_double(acc.h) << ',' << csv::format_double(acc.score) << '\n';
    const auto err = min_error_sum_threshold(y, q);
    out << "min_fpr_plus_fnr," << csv::format_double(err.h) << ',' << csv::format_double(err.score) << '\n';
  });
}

void do_roc(Run& run, const FeatureTable& table, const LogisticModel& model,
            const std::map<std::string, DomainLabel>& labels) {
  std::vector<int> y;
  std::vector<double> q;
  scored(table, model, labels, y, q);
  const auto roc = roc_auc(y, q);
  run.write("roc.csv", [&](std::ostream& out) { write_roc_csv(roc, out); });
  run.write("auc.csv", [&](std::ostream& out) { out << "auc\n" << csv::format_double(roc.auc) << '\n'; });
}

void do_predict(Run& run, const FeatureTable& table, const LogisticModel& model) {
  run.write("predictions.csv", [&](std::ostream& out) {
    out << "domain,q,representative\n";
    for (std::size_t r = 0; r < table.domains.size(); ++r) {
      const double q = predict(model, table, r);
      out << csv::quote(table.domains[r]) << ',' << csv::format_double(q) << ','
          << (classify_probability(q, model.h) == DomainLabel::Representative ? 1 : 0) << '\n';
    }
  });
}

void do_variation(Run& run, const Options& o, std::span<const UserTrace> traces) {
  const auto prof = topk_profiles(traces, o.k);
  const double sa = topk_variation(prof);
  run.write("variation.csv", [&](std::ostream& out) {
    out << "k,users,sa\n" << o.k << ',' << prof.users.size() << ',' << csv::format_double(sa) << '\n';
  });
}

int run_command(const std::string& cmd, const Options& o) {
  Run run(cmd, o);
  const auto unit = size_unit(o);
  if (cmd == "synth") {
    do_synth(run, o);
  } else if (cmd == "ingest") {
    do_ingest(run, o);
  } else if (cmd == "fitdist") {
    do_fitdist(run, o);
  } else if (cmd == "threshold") {
    const auto traces = load_traces(o);
    write_thresholds(run, batch_thresholds(traces, burst_config(o)));
  } else if (cmd == "decompose") {
    const auto traces = load_traces(o);
    write_decomposition(run, traces, analyze(traces, burst_config(o), unit));
  } else if (cmd == "features") {
    const auto traces = load_traces(o);
    const auto a = analyze(traces, burst_config(o), unit);
    run.write("features.csv", [&](std::ostream& out) { write_feature_matrix(a.features, out); });
  } else if (cmd == "train") {
    do_train(run, o, load_features(o, run), read_labels(require(o.labels, "--labels")));
  } else if (cmd == "predict") {
    do_predict(run, load_features(o, run), load_model_for(o, run));
  } else if (cmd == "evaluate") {
    do_evaluate(run, o, load_features(o, run), load_model_for(o, run), read_labels(require(o.labels, "--labels")));
  } else if (cmd == "roc") {
    do_roc(run, load_features(o, run), load_model_for(o, run), read_labels(require(o.labels, "--labels")));
  } else if (cmd == "variation") {
    do_variation(run, o, load_traces(o));
  } else if (cmd == "pipeline") {
    std::vector<UserTrace> traces;
    std::map<std::string, DomainLabel> labels;
    if (o.traces.empty()) {
      labels = do_synth(run, o);
      traces = parse_traces(run.path("traces.csv")).traces;
    } else {
      traces = do_ingest(run, o);
    }
    if (!o.labels.empty()) labels = read_labels(o.labels);
    if (labels.empty()) throw UsageError("pipeline on ingested traces needs --labels");
    const auto a = analyze(traces, burst_config(o), unit);
    write_thresholds(run, a.thresholds);
    write_decomposition(run, traces, a);
    run.write("features.csv", [&](std::ostream& out) { write_feature_matrix(a.features, out); });
    const auto table = to_table(a.features);
    const auto model = do_train(run, o, table, labels);
    const auto holdout = split_labels(labels, o.seed).holdout;
    do_evaluate(run, o, table, model, holdout);
    do_roc(run, table, model, holdout);
  } else {
    throw UsageError("unknown command '" + cmd + "'");
  }
  run.finish();
  return 0;
}

// Values from the config file fill options the command line left unset.
void apply_config(Options& o, const std::map<std::string, CLI::Option*>& opts) {
  if (o.config.empty()) return;
  std::ifstream in(o.config);
  if (!in) throw IoError(o.config, "cannot open config file");
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(o.config, e.what());
  }
  if (!cfg.is_object()) throw ParseError(o.config, "config must be a JSON object");
  auto unset = [&](const std::string& key) {
    auto it = opts.find(key);
    return it == opts.end() || it->second->count() == 0;
  };
  try {
    for (const auto& [key, v] : cfg.items()) {
      if (!unset(key)) continue;
      if (key == "traces") o.traces = v.get<std::string>();
      else if (key == "labels") o.labels = v.get<std::string>();
      else if (key == "out") o.out = v.get<std::string>();
      else if (key == "model") o.model = v.get<std::string>();
      else if (key == "features") o.features = v.get<std::string>();
      else if (key == "bin_length") o.bin_length = v.get<double>();
      else if (key == "p") o.p = v.get<double>();
      else if (key == "J") o.J = v.get<int>();
      else if (key == "h") o.h = v.is_array() ? v.get<std::vector<double>>() : std::vector<double>{v.get<double>()};
      else if (key == "seed") o.seed = v.get<std::uint64_t>();
      else if (key == "size_unit") o.size_unit = v.get<std::string>();
      else if (key == "grid_size") o.grid_size = v.get<std::size_t>();
      else if (key == "users") o.users = v.get<std::size_t>();
      else if (key == "k") o.k = v.get<std::size_t>();
      else if (key == "columns") o.columns = v.get<std::vector<std::string>>();
      else if (key == "stepwise") o.stepwise = v.get<std::string>();
      else if (key == "standardize") o.standardize = v.get<bool>();
      else if (key == "synth") o.synth = v;
      else throw ParseError(o.config, "unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ParseError(o.config, e.what());
  }
}

std::string one_line(std::string s) {
  for (auto& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Per-user burst segmentation and representative-domain classification"};
  app.set_version_flag("--version", BURSTPROF_VERSION);
  app.require_subcommand(1);
  app.set_help_flag("--help", "print help");  // -h would clash with --h

  Options o;
  std::map<std::string, std::map<std::string, CLI::Option*>> registered;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"synth", "generate labeled synthetic traces"},
      {"ingest", "validate and normalise a trace file"},
      {"fitdist", "fit gap densities per user and report AIC/BIC/S_b"},
      {"threshold", "adaptive per-user burst threshold"},
      {"decompose", "split traces into bursts"},
      {"features", "per-domain record and burst features"},
      {"train", "fit the logistic classifier on half the labels"},
      {"predict", "representativeness probability per domain"},
      {"evaluate", "trade-off metrics at each --h"},
      {"roc", "ROC curve and AUC"},
      {"variation", "top-k activity variation across users"},
      {"pipeline", "synth or ingest, then threshold through evaluate"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->set_help_flag("--help", "print help");
    auto& m = registered[name];
    m["traces"] = sub->add_option("--traces", o.traces, "trace CSV");
    m["labels"] = sub->add_option("--labels", o.labels, "labels CSV (domain,label)");
    m["out"] = sub->add_option("--out", o.out, "output directory");
    m["config"] = sub->add_option("--config", o.config, "JSON config file; flags take precedence");
    m["model"] = sub->add_option("--model", o.model, "model JSON (default <out>/model.json)");
    m["features"] = sub->add_option("--features", o.features, "feature CSV (default <out>/features.csv)");
    m["bin_length"] = sub->add_option("--bin-length", o.bin_length, "histogram bin length l (s)");
    m["p"] = sub->add_option("--p", o.p, "bin contribution cutoff p");
    m["J"] = sub->add_option("--J", o.J, "run of quiet bins J");
    m["h"] = sub->add_option("--h", o.h, "classification boundary (repeatable)");
    m["seed"] = sub->add_option("--seed", o.seed, "seed for generation and label split");
    m["size_unit"] = sub->add_option("--size-unit", o.size_unit, "feature size unit")->check(
        CLI::IsMember({"bytes", "kb"}));
    m["grid_size"] = sub->add_option("--grid-size", o.grid_size, "KDE grid points");
    m["users"] = sub->add_option("--users", o.users, "synthetic users");
    m["k"] = sub->add_option("--k", o.k, "top-k size for variation");
    m["columns"] = sub->add_option("--columns", o.columns, "model covariates")->delimiter(',');
    m["stepwise"] = sub->add_option("--stepwise", o.stepwise, "forward AIC selection over record, burst or all");
    m["standardize"] = sub->add_flag("--standardize", o.standardize, "z-score covariates before fitting");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "burstprof: usage: " << one_line(e.what()) << '\n';
    return 2;
  }

  const auto* sub = app.get_subcommands().front();
  const std::string cmd = sub->get_name();
  try {
    apply_config(o, registered.at(cmd));
    return run_command(cmd, o);
  } catch (const UsageError& e) {
    std::cerr << "burstprof: usage: " << one_line(e.what()) << '\n';
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "burstprof: error: parse: " << one_line(e.what()) << '\n';
  } catch (const IoError& e) {
    std::cerr << "burstprof: error: io: " << one_line(e.what()) << '\n';
  } catch (const ConfigError& e) {
    std::cerr << "burstprof: error: config: " << one_line(e.what()) << '\n';
  } catch (const Error& e) {
    std::cerr << "burstprof: error: runtime: " << one_line(e.what()) << '\n';
  } catch (const std::exception& e) {
    std::cerr << "burstprof: error: internal: " << one_line(e.what()) << '\n';
  }
  return 1;
}
