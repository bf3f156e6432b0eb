#pragma once

#include <string>
#include <vector>

namespace refac_cli {

/// Rectangular CSV with a header row. Cells are kept as text.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;  // 1-based source line of each row

  int column(const std::string& name) const;  // -1 when absent
  std::size_t size() const { return rows.size(); }
};

/// Reads a comma-separated file. Throws std::runtime_error naming the line
/// for ragged rows, empty headers and duplicate column names.
CsvTable read_csv(const std::string& path);

double parse_number(const CsvTable& t, std::size_t row, int col);
int parse_integer(const CsvTable& t, std::size_t row, int col);

/// 17 significant digits, the format used in golden files.
std::string format_double(double v);

}  // namespace refac_cli
