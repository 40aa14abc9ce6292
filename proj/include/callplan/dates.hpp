#pragma once

#include <chrono>
#include <string>

namespace callplan {

/// Calendar dates are day-resolution throughout; no time zones.
using Date = std::chrono::sys_days;

/// Parses strict ISO-8601 "YYYY-MM-DD". Throws DataError on anything else.
Date parse_date(const std::string &text);

/// Formats as "YYYY-MM-DD".
std::string format_date(Date d);

inline int days_between(Date from, Date to) {
    return static_cast<int>((to - from).count());
}

/// Half-open range [start, end).
struct DateRange {
    Date start;
    Date end;

    bool contains(Date d) const { return d >= start && d < end; }
    int length_days() const { return days_between(start, end); }
};

} // namespace callplan
