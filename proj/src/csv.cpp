#include "dynas/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dynas/common.hpp"

namespace dynas::csv {

std::string format_double(double v) {
  if (std::isnan(v)) return {};
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  if (s.empty()) return kNaN;
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw SchemaError("not a number: '" + std::string(s) + "'");
  return v;
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& fields, char sep) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += sep;
    out += fields[i];
  }
  return out;
}

std::string schema_line(std::string_view table) {
  return "#schema=dynas." + std::string(table) + "/v" + std::to_string(kSchemaVersion);
}

int Table::column(std::string_view col) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == col) return static_cast<int>(i);
  return -1;
}

int Table::require_column(std::string_view col) const {
  int c = column(col);
  if (c < 0) throw SchemaError(name + ": missing column '" + std::string(col) + "'");
  return c;
}

Table read_table(const std::filesystem::path& path, std::string_view expected_name) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Table t;
  t.name = std::string(expected_name);
  std::string line;
  if (!std::getline(in, line) || line != schema_line(expected_name))
    throw SchemaError(path.string() + ": expected schema line '" + schema_line(expected_name) +
                      "', got '" + line + "'");
  if (!std::getline(in, line)) throw SchemaError(path.string() + ": missing header");
  t.header = split(line);
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split(line);
    if (fields.size() != t.header.size())
      throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(t.header.size()) + " fields, got " +
                        std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
  }
  return t;
}

void write_table(const std::filesystem::path& path, std::string_view name,
                 const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << schema_line(name) << '\n' << join(header) << '\n';
  for (const auto& r : rows) out << join(r) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace dynas::csv
