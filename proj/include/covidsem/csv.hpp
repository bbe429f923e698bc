#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace covidsem {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const;           // -1 when absent
  int need_col(const std::string& name) const;      // throws DataError
};

// RFC-4180-ish: quoted fields, embedded commas/quotes, CR-LF line ends.
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(std::istream& in, const std::string& origin);

std::string csv_escape(const std::string& field);

// Shortest round-trip decimal form; parsing it recovers the exact double.
std::string fmt_double(double x);
double parse_double(const std::string& s, const std::string& context);
long long parse_count(const std::string& s, const std::string& context);

}  // namespace covidsem
