#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace mvcl::csv {

// Minimal CSV support: comma separator, optional double-quoting with ""
// escapes, no embedded newlines. Enough for manifests and result tables.

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const; // -1 if absent
};

std::vector<std::string> split_line(const std::string& line);
std::string join_line(const std::vector<std::string>& fields);

// Reads a CSV file with a header line. Throws DataError on I/O failure or
// ragged rows.
Table read_file(const std::filesystem::path& path);

void write_file(const std::filesystem::path& path, const Table& table);

std::string format_double(double v); // round-trip precision, shortest-ish

} // namespace mvcl::csv
