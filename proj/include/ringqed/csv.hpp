#pragma once

#include <string>
#include <utility>
#include <vector>

namespace ringqed {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;  // column-major

  std::size_t n_rows() const { return columns.empty() ? 0 : columns.front().size(); }
};

/// Render a double the same way everywhere so identical values give identical
/// bytes (report determinism hinges on this).
std::string format_double(double v);

/// Write columns with a header line. Column lengths must match.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns);

std::string csv_to_string(const std::vector<std::string>& header,
                          const std::vector<std::vector<double>>& columns);

/// Read a numeric CSV; a non-numeric first line is kept as the header.
CsvTable read_csv(const std::string& path);

}  // namespace ringqed
