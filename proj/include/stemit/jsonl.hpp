// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stemit/error.hpp"
#include "stemit/record.hpp"

namespace stemit::graph {

using ojson = nlohmann::ordered_json;

namespace detail {

inline ojson grid_to_json(const LayerGrid& g) {
  ojson rows = ojson::array();
  for (const auto& layer : g) {
    ojson row = ojson::array();
    for (double v : layer) {
      if (is_absent(v))
        row.push_back(nullptr);
      else
        row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline LayerGrid grid_from_json(const nlohmann::json& j, const std::string& path, bool allow_null) {
  if (!j.is_array()) throw DataError(path + " must be an array of layers");
  LayerGrid g;
  g.reserve(j.size());
  for (std::size_t l = 0; l < j.size(); ++l) {
    const auto& row = j[l];
    const std::string at = path + "[" + std::to_string(l) + "]";
    if (!row.is_array()) throw DataError(at + " must be an array");
    std::vector<double> vals;
    vals.reserve(row.size());
    for (const auto& v : row) {
      if (v.is_null() && allow_null)
        vals.push_back(kAbsent);
      else if (v.is_number())
        vals.push_back(v.get<double>());
      else
        throw DataError(at + " holds a non-numeric value");
    }
    g.push_back(std::move(vals));
  }
  return g;
}

template <class T>
std::vector<T> array_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw DataError(std::string("missing field '") + key + "'");
  const auto& a = j.at(key);
  if (!a.is_array()) throw DataError(std::string("field '") + key + "' must be an array");
  std::vector<T> out;
  out.reserve(a.size());
  for (const auto& v : a) {
    if (!v.is_number()) throw DataError(std::string("field '") + key + "' holds a non-numeric value");
    out.push_back(v.get<T>());
  }
  return out;
}

}  // namespace detail

/// One JSON object per record. Doubles use the shortest decimal form that
/// round-trips; absent thickness is written as null.
inline std::string to_json_line(const LayerSequenceRecord& r) {
  ojson j;
  j["id"] = r.id;
  j["lat"] = r.lat;
  j["lon"] = r.lon;
  j["years"] = r.years;
  j["thickness"] = detail::grid_to_json(r.thickness);
  ojson phys = ojson::object();
  for (auto name : kPhysFields) {
    auto it = r.phys.find(std::string(name));
    if (it != r.phys.end()) phys[std::string(name)] = detail::grid_to_json(it->second);
  }
  j["phys"] = std::move(phys);
  return j.dump();
}

inline LayerSequenceRecord from_json_line(const std::string& line, std::size_t line_no) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), line_no);
  }
  const std::string where = "line " + std::to_string(line_no) + ": ";
  if (!j.is_object()) throw ParseError("record must be a JSON object", line_no);
  LayerSequenceRecord r;
  try {
    for (const auto& [key, _] : j.items()) {
      if (key != "id" && key != "lat" && key != "lon" && key != "years" && key != "thickness" && key != "phys")
        throw DataError("unknown field '" + key + "'");
    }
    if (!j.contains("id") || !j["id"].is_string()) throw DataError("field 'id' must be a string");
    r.id = j["id"].get<std::string>();
    r.lat = detail::array_field<double>(j, "lat");
    r.lon = detail::array_field<double>(j, "lon");
    r.years = detail::array_field<int>(j, "years");
    if (!j.contains("thickness")) throw DataError("missing field 'thickness'");
    r.thickness = detail::grid_from_json(j["thickness"], "thickness", true);
    if (j.contains("phys")) {
      const auto& p = j["phys"];
      if (!p.is_object()) throw DataError("field 'phys' must be an object");
      for (const auto& [name, grid] : p.items()) {
        if (!is_phys_field(name)) throw DataError("unknown phys field 'phys." + name + "'");
        r.phys[name] = detail::grid_from_json(grid, "phys." + name, false);
      }
    }
    validate(r);
  } catch (const DataError& e) {
    throw DataError(where + e.what());
  }
  return r;
}

inline void write_jsonl(const std::vector<LayerSequenceRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  for (const auto& r : records) out << to_json_line(r) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline std::vector<LayerSequenceRecord> read_jsonl_stream(std::istream& in) {
  std::vector<LayerSequenceRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(from_json_line(line, line_no));
  }
  return out;
}

inline std::vector<LayerSequenceRecord> read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  return read_jsonl_stream(in);
}

}  // namespace stemit::graph
