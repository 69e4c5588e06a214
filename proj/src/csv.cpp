#include "mvcl/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "mvcl/common.hpp"

namespace mvcl::csv {

int Table::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

static bool needs_quoting(const std::string& s) {
  return s.find_first_of(",\"") != std::string::npos;
}

std::string join_line(const std::vector<std::string>& fields) {
  std::string out;
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    if (needs_quoting(fields[i])) {
      out += '"';
      for (char c : fields[i]) {
        if (c == '"') out += '"';
        out += c;
      }
      out += '"';
    } else {
      out += fields[i];
    }
  }
  return out;
}

Table read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file: " + path.string());
  Table t;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() && in.peek() == EOF) break;
    auto fields = split_line(line);
    if (lineno == 1) {
      t.header = std::move(fields);
    } else {
      if (fields.size() != t.header.size()) {
        throw DataError(path.string() + ": row " + std::to_string(lineno) +
                        " has " + std::to_string(fields.size()) +
                        " fields, expected " + std::to_string(t.header.size()));
      }
      t.rows.push_back(std::move(fields));
    }
  }
  if (t.header.empty()) throw DataError("empty CSV file: " + path.string());
  return t;
}

void write_file(const std::filesystem::path& path, const Table& table) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write CSV file: " + path.string());
  out << join_line(table.header) << "\n";
  for (const auto& row : table.rows) out << join_line(row) << "\n";
  if (!out) throw DataError("write failure: " + path.string());
}

std::string format_double(double v) {
  // %.17g always round-trips; prefer the shorter %.15g when it does.
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.15g", v);
  if (std::strtod(buf, nullptr) != v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
  }
  return buf;
}

} // namespace mvcl::csv
