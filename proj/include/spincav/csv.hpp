#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "spincav/errors.hpp"

namespace spincav {

// CSV dialect: comma separated, mandatory header row, '.' decimal point,
// no locale dependence (std::to_chars / from_chars throughout).

inline std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v,
                                 std::chars_format::general, 12);
  return std::string(buf, res.ptr);
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return k;
    throw DataError("missing CSV column '" + name + "'");
  }

  bool has_column(const std::string& name) const {
    for (const auto& h : header)
      if (h == name) return true;
    return false;
  }
};

inline void write_csv(const std::filesystem::path& path,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  for (std::size_t k = 0; k < header.size(); ++k)
    out << (k ? "," : "") << header[k];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.size(); ++k)
      out << (k ? "," : "") << format_double(row[k]);
    out << "\n";
  }
  if (!out) throw DataError("write failed: " + path.string());
}

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw FileNotFoundError(path.string());
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path.string());
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (table.header.empty()) {
      for (auto& f : split_fields(line)) table.header.push_back(f);
      continue;
    }
    const auto fields = split_fields(line);
    if (fields.size() != table.header.size())
      throw DataError(path.string() + ": row " + std::to_string(line_no) +
                      ": expected " + std::to_string(table.header.size()) +
                      " fields, got " + std::to_string(fields.size()));
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) {
      double v = 0.0;
      const char* begin = f.data();
      const char* end = f.data() + f.size();
      while (begin < end && *begin == ' ') ++begin;
      const auto res = std::from_chars(begin, end, v);
      if (res.ec != std::errc() || res.ptr != end)
        throw DataError(path.string() + ": row " + std::to_string(line_no) +
                        ": bad number '" + f + "'");
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty())
    throw DataError(path.string() + ": empty file (missing header row)");
  return table;
}

inline double db_from_linear(double magnitude) {
  return 20.0 * std::log10(std::max(magnitude, 1e-300));
}

inline double linear_from_db(double db) { return std::pow(10.0, db / 20.0); }

}  // namespace spincav
