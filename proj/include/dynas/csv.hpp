#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dynas::csv {

inline constexpr int kSchemaVersion = 1;

/// Shortest representation that parses back to the same double. NaN maps
/// to the empty string.
std::string format_double(double v);
double parse_double(std::string_view s);

std::vector<std::string> split(std::string_view line, char sep = ',');
std::string join(const std::vector<std::string>& fields, char sep = ',');

/// First line of every CSV written by this project.
std::string schema_line(std::string_view table);

struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(std::string_view col) const;  // -1 if absent
  int require_column(std::string_view col) const;
};

/// Reads a CSV written by write_table; rejects a missing or unknown schema
/// line and rows whose width disagrees with the header.
Table read_table(const std::filesystem::path& path, std::string_view expected_name);

/// Writes schema line, header and rows. Parent directories are created.
void write_table(const std::filesystem::path& path, std::string_view name,
                 const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows);

}  // namespace dynas::csv
