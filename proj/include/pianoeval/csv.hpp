#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pianoeval {

/// Comma-separated table with a header row. Fields may be double-quoted;
/// blank lines and lines starting with '#' are skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// 1-based source line of each row, for diagnostics.
  std::vector<std::size_t> lines;

  std::optional<std::size_t> column(const std::string& name) const;
  std::size_t require_column(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);

double parse_double(const std::string& field, const std::string& context);

std::string csv_escape(const std::string& field);

}  // namespace pianoeval
