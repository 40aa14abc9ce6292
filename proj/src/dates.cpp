#include "callplan/dates.hpp"

#include "callplan/error.hpp"

#include <cctype>
#include <cstdio>

namespace callplan {

Date parse_date(const std::string &text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        throw DataError("bad date '" + text + "' (expected YYYY-MM-DD)");
    }
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
            throw DataError("bad date '" + text + "' (expected YYYY-MM-DD)");
        }
    }
    int y = std::stoi(text.substr(0, 4));
    unsigned m = static_cast<unsigned>(std::stoi(text.substr(5, 2)));
    unsigned d = static_cast<unsigned>(std::stoi(text.substr(8, 2)));
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                    std::chrono::day{d}};
    if (!ymd.ok()) {
        throw DataError("bad date '" + text + "' (not a calendar date)");
    }
    return Date{ymd};
}

std::string format_date(Date d) {
    std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()),
                  unsigned(ymd.day()));
    return buf;
}

} // namespace callplan
