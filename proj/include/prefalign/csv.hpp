#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace prefalign {

/// Comma-separated table with a one-line header. Cells are plain tokens (no
/// quoting); numbers use the shortest round-trip decimal form.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
  std::vector<double> numbers(const std::string& name) const;

  std::string to_string() const;
  static CsvTable parse(const std::string& text);

  friend bool operator==(const CsvTable&, const CsvTable&) = default;
};

/// Shortest decimal that parses back to exactly `v`.
std::string format_number(double v);
double parse_number(const std::string& text);

void write_csv(const CsvTable& table, const std::filesystem::path& path);
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace prefalign
