#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <string>
#include <vector>

#include "kgtrust/graph.hpp"

namespace kgtrust::detail {

// Reads one RFC 4180 record. Quoted fields may contain commas, doubled quotes
// and newlines. `line` is advanced by the number of physical lines consumed.
// Returns false at end of input.
inline bool read_csv_record(std::istream& in, std::vector<std::string>& fields,
                            std::size_t& line) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      ++line;
      fields.push_back(std::move(field));
      return true;
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (!any) return false;
  ++line;
  fields.push_back(std::move(field));
  return true;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

struct CsvTable {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

inline CsvTable read_csv_file(const std::filesystem::path& path, std::size_t min_fields) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing or unreadable file: " + path.string());
  CsvTable table;
  std::vector<std::string> fields;
  std::size_t line = 0;
  bool header = true;
  while (true) {
    std::size_t start = line + 1;
    if (!read_csv_record(in, fields, line)) break;
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    if (fields.size() < min_fields) {
      throw ParseError(path.filename().string() + ":" + std::to_string(start) + ": expected " +
                           std::to_string(min_fields) + " fields, got " +
                           std::to_string(fields.size()),
                       start);
    }
    table.rows.push_back(fields);
    table.line_numbers.push_back(start);
  }
  if (header) throw ParseError(path.filename().string() + ": missing header row", 0);
  return table;
}

}  // namespace kgtrust::detail
