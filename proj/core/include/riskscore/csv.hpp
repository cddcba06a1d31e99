#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace riskscore::csv {

// RFC 4180 quoting: fields containing a comma, quote or newline are quoted.
std::string escape(std::string_view field);
std::string join(const std::vector<std::string>& fields);

// Shortest-round-trip rendering (%.17g); inf and nan spelled out.
std::string number(double value);

// Splits one line. Quoted fields may contain commas and doubled quotes but
// not newlines.
std::vector<std::string> split(std::string_view line);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Reads a file with a header row. Every row must have the header's width
// and the header must start with the expected columns.
Table read(const std::filesystem::path& path,
           const std::vector<std::string>& expected_header);

}  // namespace riskscore::csv
