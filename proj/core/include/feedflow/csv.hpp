#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace feedflow {

// Minimal comma-separated table: a header row plus string cells. Cells are
// trimmed of surrounding spaces; quoting is not supported because none of
// the files we exchange need it.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; throws ParseError if absent.
  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

double parse_csv_double(const std::string& cell, std::size_t line);
long long parse_csv_int(const std::string& cell, std::size_t line);

}  // namespace feedflow
