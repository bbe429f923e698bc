#pragma once

#include <cstdint>
#include <string>

namespace covidsem {

// Calendar day stored as days since 1970-01-01 so date arithmetic is plain
// integer math and panels can index dates contiguously.
using Day = std::int32_t;

Day days_from_civil(int year, int month, int day);
void civil_from_days(Day z, int& year, int& month, int& day);

// Parses "YYYY-MM-DD"; throws DataError on anything else.
Day parse_date(const std::string& s);
std::string format_date(Day d);

int month_of(Day d);  // 1..12
int year_of(Day d);

// Monday-based week index, constant within a calendar week.
std::int32_t week_bucket(Day d);

}  // namespace covidsem
