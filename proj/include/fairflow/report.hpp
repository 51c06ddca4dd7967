#pragma once

// JSON and CSV renderings of metric reports and FairMatch round statistics.

#include <cmath>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fairflow/fairmatch.hpp"
#include "fairflow/metrics.hpp"

namespace fairflow {

namespace detail {

inline nlohmann::json number_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

inline std::string csv_number(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream out;
  out.precision(10);
  out << v;
  return out.str();
}

}  // namespace detail

/// Column order of the comparison tables.
inline const std::vector<std::string>& metric_csv_columns() {
  static const std::vector<std::string> cols{"P",   "1-IA", "5-IA", "LT", "1-SA",
                                             "5-SA", "IG",  "IE",   "SG", "SE"};
  return cols;
}

inline std::vector<double> metric_csv_values(const MetricReport& r) {
  auto at = [](const std::map<std::size_t, double>& m, std::size_t a) {
    auto it = m.find(a);
    return it == m.end() ? kUndefined : it->second;
  };
  return {r.precision, at(r.alpha_ia, 1), at(r.alpha_ia, 5), r.lt, at(r.alpha_sa, 1),
          at(r.alpha_sa, 5), r.ig, r.ie, r.sg, r.se};
}

inline std::string metric_csv_header() {
  std::string out;
  for (const auto& c : metric_csv_columns()) {
    if (!out.empty()) out += ',';
    out += c;
  }
  return out;
}

inline std::string metric_csv_row(const MetricReport& r) {
  std::string out;
  bool first = true;
  for (double v : metric_csv_values(r)) {
    if (!first) out += ',';
    first = false;
    out += detail::csv_number(v);
  }
  return out;
}

/// Keys are emitted in sorted order; undefined values become null.
inline nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j;
  j["precision"] = r.precision;
  j["lt"] = r.lt;
  j["ig"] = detail::number_or_null(r.ig);
  j["ie"] = detail::number_or_null(r.ie);
  j["sg"] = detail::number_or_null(r.sg);
  j["se"] = detail::number_or_null(r.se);
  nlohmann::json ia = nlohmann::json::object(), sa = nlohmann::json::object();
  for (const auto& [a, v] : r.alpha_ia) ia[std::to_string(a)] = detail::number_or_null(v);
  for (const auto& [a, v] : r.alpha_sa) sa[std::to_string(a)] = detail::number_or_null(v);
  j["alpha_ia"] = ia;
  j["alpha_sa"] = sa;
  if (r.has_groups) {
    nlohmann::json ivs = nlohmann::json::array(), svs = nlohmann::json::array();
    for (double v : r.ivs) ivs.push_back(detail::number_or_null(v));
    for (double v : r.svs) svs.push_back(detail::number_or_null(v));
    j["ivs"] = ivs;
    j["svs"] = svs;
  }
  return j;
}

inline nlohmann::json to_json(const McNemarResult& m) {
  return {{"only_a", m.only_a},
          {"only_b", m.only_b},
          {"statistic", detail::number_or_null(m.statistic)},
          {"p_value", detail::number_or_null(m.p_value)}};
}

inline nlohmann::json to_json(const std::vector<IterationStats>& stats) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : stats) {
    out.push_back({{"iteration", s.iteration},
                   {"items_remaining", s.items_remaining},
                   {"pairs_remaining", s.pairs_remaining},
                   {"candidates", s.candidates},
                   {"max_flow", s.max_flow}});
  }
  return out;
}

/// Ten-row group table: group, ivs, svs.
inline void write_group_table(std::ostream& out, const MetricReport& r) {
  out << "group,ivs,svs\n";
  for (std::size_t g = 0; g < 10; ++g) {
    out << 'G' << g + 1 << ',' << detail::csv_number(r.ivs[g]) << ','
        << detail::csv_number(r.svs[g]) << '\n';
  }
}

}  // namespace fairflow
