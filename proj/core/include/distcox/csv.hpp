#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace distcox::csv {

// Comma-separated UTF-8 text with a header row. Values in this package are
// numerals and plain identifiers, so there is no quoting or escaping; a comma
// inside a value is unsupported by design.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t column_index(std::string_view name) const;  // throws MissingColumn
  std::optional<std::size_t> find_column(std::string_view name) const;
};

Table read_table(const std::filesystem::path& path);
Table parse_table(std::string_view text);
void write_table(const std::filesystem::path& path, const Table& table);
std::string render_table(const Table& table);

// Shortest decimal that parses back to the identical double (up to 17
// significant digits). All protocol and output files use this so that
// serialization never perturbs a value.
std::string format_double(double v);

std::optional<double> parse_double(std::string_view field);
std::optional<long long> parse_int(std::string_view field);

}  // namespace distcox::csv
