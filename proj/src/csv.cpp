#include "prefalign/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "prefalign/error.hpp"

namespace prefalign {

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_number(const std::string& text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    fail("invalid-file", "'" + text + "' is not a number");
  return v;
}

void CsvTable::add_row(std::vector<std::string> row) {
  require(row.size() == header.size(), "invalid-input",
          "csv row has " + std::to_string(row.size()) + " cells, header has " + std::to_string(header.size()));
  rows.push_back(std::move(row));
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  fail("invalid-input", "csv has no column '" + name + "'");
}

double CsvTable::number(std::size_t row, const std::string& name) const {
  return parse_number(rows.at(row).at(column(name)));
}

std::vector<double> CsvTable::numbers(const std::string& name) const {
  std::vector<double> out;
  for (std::size_t r = 0; r < rows.size(); ++r) out.push_back(number(r, name));
  return out;
}

std::string CsvTable::to_string() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      require(cells[i].find_first_of(",\n\r") == std::string::npos, "invalid-input",
              "csv cell '" + cells[i] + "' contains a separator");
      out += cells[i];
    }
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

CsvTable CsvTable::parse(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      require(cells.size() == t.header.size(), "invalid-file", "csv row width differs from header");
      t.rows.push_back(std::move(cells));
    }
  }
  require(!first, "invalid-file", "csv is empty");
  return t;
}

void write_csv(const CsvTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail("io", "cannot write " + path.string());
  out << table.to_string();
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("io", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return CsvTable::parse(ss.str());
}

}  // namespace prefalign
