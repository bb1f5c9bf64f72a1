#include "ringqed/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "ringqed/common.hpp"

namespace ringqed {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string csv_to_string(const std::vector<std::string>& header,
                          const std::vector<std::vector<double>>& columns) {
  if (!columns.empty()) {
    for (const auto& col : columns)
      if (col.size() != columns.front().size())
        throw ValidationError("csv: ragged columns");
  }
  std::string out;
  for (std::size_t j = 0; j < header.size(); ++j) {
    out += header[j];
    out += (j + 1 < header.size()) ? ',' : '\n';
  }
  const std::size_t n = columns.empty() ? 0 : columns.front().size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      out += format_double(columns[j][i]);
      out += (j + 1 < columns.size()) ? ',' : '\n';
    }
  }
  return out;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ComputeError("cannot open for writing: " + path);
  f << csv_to_string(header, columns);
}

CsvTable read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open: " + path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (first) {
      first = false;
      // Header detection: any cell that fails to parse as a number.
      bool numeric = true;
      for (const auto& c : cells) {
        try {
          std::size_t pos = 0;
          (void)std::stod(c, &pos);
          if (pos != c.size()) numeric = false;
        } catch (...) {
          numeric = false;
        }
      }
      table.columns.resize(cells.size());
      if (!numeric) {
        table.header = cells;
        continue;
      }
    }
    if (cells.size() != table.columns.size())
      throw ValidationError("csv: inconsistent column count in " + path);
    for (std::size_t j = 0; j < cells.size(); ++j) {
      try {
        table.columns[j].push_back(std::stod(cells[j]));
      } catch (...) {
        throw ValidationError("csv: non-numeric cell '" + cells[j] + "' in " + path);
      }
    }
  }
  return table;
}

}  // namespace ringqed
