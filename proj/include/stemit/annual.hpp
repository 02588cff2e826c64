// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <map>
#include <string>
#include <vector>

#include "stemit/error.hpp"

namespace stemit::clim {

using Date = std::chrono::year_month_day;

inline std::string format_date(Date d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

inline Date make_date(int y, unsigned m, unsigned d) {
  Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) throw DataError("invalid calendar date " + std::to_string(y) + "-" + std::to_string(m) + "-" +
                                  std::to_string(d));
  return date;
}

/// Daily climate values for one grid cell, one vector per field.
struct DailySeries {
  std::string id;
  std::vector<Date> dates;
  std::map<std::string, std::vector<double>> values;

  /// Contiguous series starting at `start`.
  static DailySeries contiguous(std::string id, Date start, std::map<std::string, std::vector<double>> values) {
    DailySeries s{std::move(id), {}, std::move(values)};
    std::size_t n = s.values.empty() ? 0 : s.values.begin()->second.size();
    const std::chrono::sys_days d0{start};
    for (std::size_t i = 0; i < n; ++i) s.dates.emplace_back(d0 + std::chrono::days{static_cast<long>(i)});
    s.validate();
    return s;
  }

  void validate() const {
    for (std::size_t i = 1; i < dates.size(); ++i) {
      if (std::chrono::sys_days{dates[i]} <= std::chrono::sys_days{dates[i - 1]})
        throw DataError("series '" + id + "': dates not strictly increasing at " + format_date(dates[i]));
    }
    for (const auto& [name, v] : values) {
      if (v.size() != dates.size())
        throw DataError("series '" + id + "': field '" + name + "' has " + std::to_string(v.size()) +
                        " values for " + std::to_string(dates.size()) + " dates");
    }
  }
};

/// Half-open accumulation window [boundary(Y−1), boundary(Y)) for year Y.
struct Window {
  std::chrono::sys_days begin;
  std::chrono::sys_days end;
};

inline Window annual_window(int year, unsigned boundary_month = 9) {
  using namespace std::chrono;
  return {sys_days{make_date(year - 1, boundary_month, 1)}, sys_days{make_date(year, boundary_month, 1)}};
}

/// Sums each field over the window of every requested year. A day missing
/// from a window raises a DataError naming the gap's first and last date.
inline std::map<std::string, std::map<int, double>> aggregate_annual(const DailySeries& series,
                                                                     const std::vector<int>& years,
                                                                     unsigned boundary_month = 9) {
  using namespace std::chrono;
  series.validate();
  std::map<std::string, std::map<int, double>> out;
  for (const auto& [name, _] : series.values) out[name];
  for (int y : years) {
    const Window w = annual_window(y, boundary_month);
    sys_days expect = w.begin;
    std::map<std::string, double> acc;
    for (const auto& [name, _] : series.values) acc[name] = 0.0;
    for (std::size_t i = 0; i < series.dates.size(); ++i) {
      const sys_days d{series.dates[i]};
      if (d < w.begin) continue;
      if (d >= w.end) break;
      if (d != expect) {
        throw DataError("series '" + series.id + "': year " + std::to_string(y) + " window is missing " +
                        format_date(Date{expect}) + " .. " + format_date(Date{d - days{1}}));
      }
      for (const auto& [name, vals] : series.values) acc[name] += vals[i];
      expect = d + days{1};
    }
    if (expect != w.end) {
      throw DataError("series '" + series.id + "': year " + std::to_string(y) + " window is missing " +
                      format_date(Date{expect}) + " .. " + format_date(Date{w.end - days{1}}));
    }
    for (const auto& [name, v] : acc) out[name][y] = v;
  }
  return out;
}

}  // namespace stemit::clim
