#pragma once

// Core trace types: one truncated-URL HTTP record, a per-user time-ordered
// trace, and the inter-arrival gap sequence derived from it.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "burstprof/error.hpp"

namespace burstprof {

enum class DomainLabel : int { NonRepresentative = 0, Representative = 1 };

struct HttpRecord {
  std::string user_id;
  double timestamp = 0.0;  // seconds since epoch
  std::string domain;      // host only
  std::uint64_t upload_size = 0;
  std::uint64_t download_size = 0;

  friend bool operator==(const HttpRecord&, const HttpRecord&) = default;
};

// True when `domain` is a bare host: non-empty, no scheme, path, query,
// fragment, userinfo or port.
inline bool is_bare_domain(std::string_view domain) {
  if (domain.empty()) return false;
  for (char c : domain) {
    if (c == '/' || c == '?' || c == '#' || c == '@' ||
        std::isspace(static_cast<unsigned char>(c)) || std::isupper(static_cast<unsigned char>(c)))
      return false;
  }
  if (domain.front() == '[') {
    // bracketed IPv6 literal, colons allowed inside
    return domain.back() == ']' && domain.find(']') == domain.size() - 1;
  }
  return domain.find(':') == std::string_view::npos;
}

// Strips a raw URL down to its lower-cased host. Subdomains and "www." are
// kept verbatim.
inline std::string truncate_url(std::string_view raw) {
  auto fail = [&](const char* why) { return ParseError(std::string(raw), why); };

  std::string_view s = raw;
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (s.empty()) throw fail("empty URL");

  if (auto scheme = s.find("://"); scheme != std::string_view::npos &&
                                   s.find_first_of("/?#") >= scheme) {
    s.remove_prefix(scheme + 3);
  } else if (s.starts_with("//")) {
    s.remove_prefix(2);
  }

  std::string_view authority = s.substr(0, s.find_first_of("/?#"));
  if (auto at = authority.rfind('@'); at != std::string_view::npos) authority.remove_prefix(at + 1);

  std::string_view host;
  if (authority.starts_with("[")) {
    auto close = authority.find(']');
    if (close == std::string_view::npos) throw fail("unterminated IPv6 literal");
    host = authority.substr(0, close + 1);
  } else {
    host = authority.substr(0, authority.find(':'));
  }
  if (host.empty()) throw fail("no host in URL");

  std::string out(host);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (!is_bare_domain(out)) throw fail("host contains invalid characters");
  return out;
}

// A single user's records in ascending time order (stable for ties).
class UserTrace {
 public:
  UserTrace() = default;

  UserTrace(std::string user_id, std::vector<HttpRecord> records)
      : user_id_(std::move(user_id)), records_(std::move(records)) {
    for (const auto& r : records_) {
      if (r.user_id != user_id_)
        throw ConfigError("record for user '" + r.user_id + "' in trace of '" + user_id_ + "'");
    }
    std::stable_sort(records_.begin(), records_.end(),
                     [](const HttpRecord& a, const HttpRecord& b) { return a.timestamp < b.timestamp; });
  }

  const std::string& user_id() const noexcept { return user_id_; }
  const std::vector<HttpRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const HttpRecord& operator[](std::size_t i) const { return records_[i]; }

  friend bool operator==(const UserTrace&, const UserTrace&) = default;

 private:
  std::string user_id_;
  std::vector<HttpRecord> records_;
};

struct InterArrivalSeq {
  std::vector<double> gaps;  // gaps[i] = t[i+1] - t[i]

  std::size_t size() const noexcept { return gaps.size(); }
  bool empty() const noexcept { return gaps.empty(); }
};

inline InterArrivalSeq interarrivals(const UserTrace& trace) {
  InterArrivalSeq seq;
  const auto& recs = trace.records();
  if (recs.size() < 2) return seq;
  seq.gaps.reserve(recs.size() - 1);
  for (std::size_t i = 1; i < recs.size(); ++i)
    seq.gaps.push_back(recs[i].timestamp - recs[i - 1].timestamp);
  return seq;
}

}  // namespace burstprof
