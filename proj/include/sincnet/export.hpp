#pragma once

// Plot-ready export of a first-layer filter bank: per-filter cutoffs (sinc
// only), taps and magnitude responses, and the cumulative response.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sincnet/filter_core.hpp"
#include "sincnet/json_util.hpp"

namespace sincnet {

struct FilterExport {
  std::string frontend;
  double sample_rate = 16000.0;
  std::size_t n_points = 0;
  FilterBank bank;
  std::vector<std::vector<double>> responses;
  CumulativeResponse cumulative;
};

inline FilterExport analyze_bank(const FilterBank& bank, const std::string& frontend, double sample_rate,
                                 std::size_t n_points) {
  FilterExport e;
  e.frontend = frontend;
  e.sample_rate = sample_rate;
  e.n_points = n_points;
  e.bank = bank;
  for (std::size_t i = 0; i < bank.n_filters; ++i) e.responses.push_back(frequency_response(bank.row(i), n_points));
  e.cumulative = cumulative_frequency_response(bank, n_points);
  return e;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// One row per filter. Sinc banks carry f1_abs_hz,f2_abs_hz before the taps;
/// learned-tap banks have taps only.
inline void write_filters_csv(const FilterExport& e, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  require(static_cast<bool>(os), ErrorKind::Io, "cannot write '" + path.string() + "'");
  const bool has_cutoffs = !e.bank.cutoffs.empty();
  os << "filter";
  if (has_cutoffs) os << ",f1_abs_hz,f2_abs_hz";
  for (std::size_t n = 0; n < e.bank.length; ++n) os << ",tap_" << n;
  os << '\n';
  for (std::size_t i = 0; i < e.bank.n_filters; ++i) {
    os << i;
    if (has_cutoffs) {
      os << ',' << format_double(e.bank.cutoffs[i].f1_abs * e.sample_rate) << ','
         << format_double(e.bank.cutoffs[i].f2_abs * e.sample_rate);
    }
    for (double t : e.bank.row(i)) os << ',' << format_double(t);
    os << '\n';
  }
  require(static_cast<bool>(os), ErrorKind::Io, "failed writing '" + path.string() + "'");
}

inline void write_cumulative_csv(const FilterExport& e, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  require(static_cast<bool>(os), ErrorKind::Io, "cannot write '" + path.string() + "'");
  os << "frequency_hz,cumulative,cumulative_normalized\n";
  for (std::size_t k = 0; k < e.n_points; ++k) {
    os << format_double(response_frequency(k, e.n_points) * e.sample_rate) << ','
       << format_double(e.cumulative.raw[k]) << ',' << format_double(e.cumulative.normalized[k]) << '\n';
  }
  require(static_cast<bool>(os), ErrorKind::Io, "failed writing '" + path.string() + "'");
}

inline json filters_to_json(const FilterExport& e) {
  json filters = json::array();
  for (std::size_t i = 0; i < e.bank.n_filters; ++i) {
    const auto row = e.bank.row(i);
    json f = {{"taps", std::vector<double>(row.begin(), row.end())}, {"response", e.responses[i]}};
    if (!e.bank.cutoffs.empty()) {
      f["f1_hz"] = e.bank.cutoffs[i].f1_abs * e.sample_rate;
      f["f2_hz"] = e.bank.cutoffs[i].f2_abs * e.sample_rate;
    }
    filters.push_back(std::move(f));
  }
  return {{"frontend", e.frontend},
          {"fs", e.sample_rate},
          {"n_points", e.n_points},
          {"filters", filters},
          {"cumulative_response", e.cumulative.raw},
          {"cumulative_normalized", e.cumulative.normalized}};
}

inline void write_filters_json(const FilterExport& e, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  require(static_cast<bool>(os), ErrorKind::Io, "cannot write '" + path.string() + "'");
  os << filters_to_json(e).dump() << '\n';
  require(static_cast<bool>(os), ErrorKind::Io, "failed writing '" + path.string() + "'");
}

}  // namespace sincnet
