#include "csv_table.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace refac_cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

[[noreturn]] void fail_cell(const CsvTable& t, std::size_t row, int col, const char* expected) {
  throw std::runtime_error("line " + std::to_string(t.line_numbers[row]) + ", column \"" +
                           t.header[col] + "\": expected " + expected + ", got \"" +
                           t.rows[row][col] + "\"");
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  CsvTable t;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    auto cells = split(line);
    if (!have_header) {
      std::set<std::string> seen;
      for (const auto& h : cells) {
        if (h.empty()) throw std::runtime_error(path + ": empty column name in header");
        if (!seen.insert(h).second) throw std::runtime_error(path + ": duplicate column \"" + h + "\"");
      }
      t.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw std::runtime_error(path + ": line " + std::to_string(line_no) + " has " +
                               std::to_string(cells.size()) + " fields but the header has " +
                               std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(line_no);
  }
  if (!have_header) throw std::runtime_error(path + ": missing header row");
  return t;
}

double parse_number(const CsvTable& t, std::size_t row, int col) {
  const std::string& s = t.rows[row][col];
  if (s.empty()) fail_cell(t, row, col, "a number");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (errno != 0 || *end != '\0' || !std::isfinite(v)) fail_cell(t, row, col, "a finite number");
  return v;
}

int parse_integer(const CsvTable& t, std::size_t row, int col) {
  const std::string& s = t.rows[row][col];
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || errno != 0 || *end != '\0' || v < -2147483647L || v > 2147483647L) {
    fail_cell(t, row, col, "an integer");
  }
  return static_cast<int>(v);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace refac_cli
