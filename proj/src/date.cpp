#include "covidsem/date.hpp"

#include <cctype>
#include <cstdio>

#include "covidsem/errors.hpp"

namespace covidsem {

// Standard proleptic Gregorian conversion via 400-year eras.
Day days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2) / 5 +
                       static_cast<unsigned>(d) - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return static_cast<Day>(era * 146097 + static_cast<int>(doe) - 719468);
}

void civil_from_days(Day z, int& y, int& m, int& d) {
  z += 719468;
  const int era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int yr = static_cast<int>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = yr + (m <= 2);
}

Day parse_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-')
    throw DataError("bad date '" + s + "', expected YYYY-MM-DD");
  for (int i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (!std::isdigit(static_cast<unsigned char>(s[i])))
      throw DataError("bad date '" + s + "', expected YYYY-MM-DD");
  int y = std::stoi(s.substr(0, 4));
  int m = std::stoi(s.substr(5, 2));
  int d = std::stoi(s.substr(8, 2));
  if (m < 1 || m > 12 || d < 1 || d > 31)
    throw DataError("out-of-range date '" + s + "'");
  Day z = days_from_civil(y, m, d);
  int y2, m2, d2;
  civil_from_days(z, y2, m2, d2);
  if (y2 != y || m2 != m || d2 != d)
    throw DataError("invalid calendar date '" + s + "'");
  return z;
}

std::string format_date(Day z) {
  int y, m, d;
  civil_from_days(z, y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, d);
  return buf;
}

int month_of(Day z) {
  int y, m, d;
  civil_from_days(z, y, m, d);
  return m;
}

int year_of(Day z) {
  int y, m, d;
  civil_from_days(z, y, m, d);
  return y;
}

std::int32_t week_bucket(Day z) {
  // 1970-01-01 was a Thursday; shift so buckets start on Mondays.
  return (z + 3) >= 0 ? (z + 3) / 7 : ((z + 3) - 6) / 7;
}

}  // namespace covidsem
