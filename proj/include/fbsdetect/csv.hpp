#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fbs::csv {

// Shortest round-trip decimal form, locale independent.
std::string format(double value);
std::string format(std::optional<double> value);  // empty field when absent

std::vector<std::string> split(std::string_view line);
std::string join(const std::vector<std::string>& fields);

double parse_double(std::string_view field);
long parse_long(std::string_view field);
bool parse_bool(std::string_view field);
std::optional<double> parse_optional(std::string_view field);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; throws ConfigError when absent.
  std::size_t column(std::string_view name) const;
};

Table read(std::istream& in);
Table read_file(const std::string& path);

}  // namespace fbs::csv
