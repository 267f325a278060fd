#pragma once

// Serialisation helpers shared by the command-line tool: fitted-density
// parameters as JSON, the per-user fit report, and artifact checksums.

#include <cstdint>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>

#include "json.hpp"

#include "burstprof/csv.hpp"
#include "burstprof/distfit.hpp"
#include "burstprof/error.hpp"

namespace burstprof {

inline nlohmann::json params_json(const DensityParams& params) {
  return std::visit(
      [](const auto& p) -> nlohmann::json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ExpParams>) return {{"rate", p.rate}};
        else if constexpr (std::is_same_v<T, ParetoParams>) return {{"x_min", p.x_min}, {"alpha", p.alpha}};
        else if constexpr (std::is_same_v<T, Exp2Params>)
          return {{"w", p.w}, {"rate1", p.rate1}, {"rate2", p.rate2}};
        else if constexpr (std::is_same_v<T, Pareto2Params>)
          return {{"w", p.w}, {"x_min", p.x_min}, {"alpha1", p.alpha1}, {"alpha2", p.alpha2}};
        else return {{"rate", p.rate}, {"alpha", p.alpha}, {"d", p.d}};
      },
      params);
}

inline constexpr std::string_view kFitReportHeader = "user_id,family,param_json,loglik,aic,bic,sb";

inline void write_fit_report_row(std::ostream& out, const std::string& user_id, const FittedDensity& m, double sb) {
  out << csv::quote(user_id) << ',' << family_name(m.family) << ',' << csv::quote(params_json(m.params).dump())
      << ',' << csv::format_double(m.log_likelihood) << ',' << csv::format_double(aic(m)) << ','
      << csv::format_double(bic(m)) << ',' << csv::format_double(sb) << '\n';
}

// 64-bit FNV-1a over a file's bytes, as 16 lower-case hex digits.
inline std::string fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for checksum");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

}  // namespace burstprof
