#pragma once

// Trace file reading and writing.
//
// Format: UTF-8 CSV with header
//   user_id,timestamp_s,url,upload_bytes,download_bytes
// Rows are streamed once and accumulated per user; bad rows are collected
// rather than aborting, up to a configurable rejection rate.

#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "burstprof/csv.hpp"
#include "burstprof/error.hpp"
#include "burstprof/trace.hpp"

namespace burstprof {

inline constexpr std::string_view kTraceHeader = "user_id,timestamp_s,url,upload_bytes,download_bytes";

struct IngestOptions {
  bool truncate = true;             // pass the url column through truncate_url
  double max_reject_rate = 0.01;    // abort when rejected / data rows exceeds this
};

struct RejectedRow {
  std::size_t line = 0;
  std::string reason;
};

struct IngestResult {
  std::vector<UserTrace> traces;  // ordered by user_id
  std::vector<RejectedRow> rejected;
  std::size_t data_rows = 0;

  std::size_t record_count() const {
    std::size_t n = 0;
    for (const auto& t : traces) n += t.size();
    return n;
  }
};

namespace detail {

inline std::optional<HttpRecord> parse_row(std::string_view line, bool truncate, std::string& why) {
  auto fields = csv::split(line);
  if (!fields) {
    why = "unterminated quote";
    return std::nullopt;
  }
  if (fields->size() != 5) {
    why = "expected 5 fields, got " + std::to_string(fields->size());
    return std::nullopt;
  }
  auto& f = *fields;
  HttpRecord rec;
  rec.user_id = f[0];
  if (rec.user_id.empty()) {
    why = "empty user_id";
    return std::nullopt;
  }
  auto ts = csv::parse_double(f[1]);
  if (!ts || !std::isfinite(*ts)) {
    why = "bad timestamp '" + f[1] + "'";
    return std::nullopt;
  }
  if (*ts < 0) {
    why = "negative timestamp";
    return std::nullopt;
  }
  rec.timestamp = *ts;

  if (truncate) {
    try {
      rec.domain = truncate_url(f[2]);
    } catch (const ParseError& e) {
      why = e.what();
      return std::nullopt;
    }
  } else {
    if (!is_bare_domain(f[2])) {
      why = "url '" + f[2] + "' is not a bare domain";
      return std::nullopt;
    }
    rec.domain = f[2];
  }

  auto up = csv::parse_int(f[3]);
  auto down = csv::parse_int(f[4]);
  if (!up || !down) {
    why = "bad size field";
    return std::nullopt;
  }
  if (*up < 0 || *down < 0) {
    why = "negative size";
    return std::nullopt;
  }
  rec.upload_size = static_cast<std::uint64_t>(*up);
  rec.download_size = static_cast<std::uint64_t>(*down);
  return rec;
}

}  // namespace detail

inline IngestResult parse_traces(std::istream& in, const IngestOptions& opts = {}) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("", "missing header row", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) throw ParseError(line, "unexpected header", 1);

  IngestResult result;
  std::map<std::string, std::vector<HttpRecord>> per_user;
  std::size_t lineno = 1;
  std::string why;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    ++result.data_rows;
    auto rec = detail::parse_row(line, opts.truncate, why);
    if (!rec) {
      result.rejected.push_back({lineno, why});
      continue;
    }
    auto& bucket = per_user[rec->user_id];
    bucket.push_back(std::move(*rec));
  }

  if (result.data_rows > 0 &&
      static_cast<double>(result.rejected.size()) >
          opts.max_reject_rate * static_cast<double>(result.data_rows)) {
    const auto& first = result.rejected.front();
    throw ParseError(first.reason,
                     "rejected " + std::to_string(result.rejected.size()) + " of " +
                         std::to_string(result.data_rows) + " rows; first failure",
                     first.line);
  }

  result.traces.reserve(per_user.size());
  for (auto& [user, recs] : per_user) result.traces.emplace_back(user, std::move(recs));
  return result;
}

inline IngestResult parse_traces(const std::string& path, const IngestOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open trace file");
  return parse_traces(in, opts);
}

inline void write_traces(std::span<const UserTrace> traces, std::ostream& out) {
  out << kTraceHeader << '\n';
  for (const auto& t : traces) {
    for (const auto& r : t.records()) {
      out << csv::quote(r.user_id) << ',' << csv::format_double(r.timestamp) << ','
          << csv::quote(r.domain) << ',' << r.upload_size << ',' << r.download_size << '\n';
    }
  }
}

inline void write_traces(std::span<const UserTrace> traces, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot open for writing");
  write_traces(traces, out);
  out.flush();
  if (!out) throw IoError(path, "write failed");
}

// Labels file: header "domain,label", label 1 = representative, 0 = not.
inline std::map<std::string, DomainLabel> read_labels(std::istream& in, const std::string& name = "<labels>") {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(name, "missing header row", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "domain,label") throw ParseError(line, "unexpected labels header", 1);
  std::map<std::string, DomainLabel> labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = csv::split(line);
    if (!fields || fields->size() != 2) throw ParseError(line, "expected domain,label", lineno);
    auto v = csv::parse_int((*fields)[1]);
    if (!v || (*v != 0 && *v != 1)) throw ParseError(line, "label must be 0 or 1", lineno);
    auto domain = truncate_url((*fields)[0]);
    auto label = *v ? DomainLabel::Representative : DomainLabel::NonRepresentative;
    if (auto [it, fresh] = labels.emplace(domain, label); !fresh && it->second != label)
      throw ParseError(line, "conflicting labels for domain", lineno);
  }
  return labels;
}

inline std::map<std::string, DomainLabel> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open labels file");
  return read_labels(in, path);
}

}  // namespace burstprof
