#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace eer {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numeric CSV with a header row. Lines starting with '#' are skipped.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::optional<std::size_t> column(const std::string& name) const;
  std::vector<double> values(std::size_t column) const;
};

/// Throws CsvError naming the line on a missing header, ragged row or
/// non-numeric cell.
CsvTable read_csv(std::istream& in);

}  // namespace eer
