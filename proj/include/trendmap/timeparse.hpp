#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>

#include "trendmap/errors.hpp"

namespace trendmap {

/// Milliseconds since the Unix epoch, UTC.
using TimestampMs = std::int64_t;

namespace detail {

// Days since 1970-01-01 for a proleptic Gregorian civil date
// (Howard Hinnant's days_from_civil).
inline std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);             // [0, 399]
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;  // [0, 365]
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;            // [0, 146096]
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

inline bool parse_uint(std::string_view s, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) return false;
    int value = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
        char c = s[i];
        if (c < '0' || c > '9') return false;
        value = value * 10 + (c - '0');
    }
    out = value;
    return true;
}

inline int days_in_month(int y, int m) {
    static const int lengths[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2 && ((y % 4 == 0 && y % 100 != 0) || y % 400 == 0)) return 29;
    return lengths[m - 1];
}

inline TimestampMs assemble(int y, int mo, int d, int h, int mi, int s, int ms,
                            std::string_view original) {
    if (mo < 1 || mo > 12 || d < 1 || d > days_in_month(y, mo) || h > 23 || mi > 59 ||
        s > 59 || ms > 999)
        throw format_error("invalid timestamp: " + std::string(original));
    std::int64_t days = days_from_civil(y, mo, d);
    return (((days * 24 + h) * 60 + mi) * 60 + s) * 1000 + ms;
}

}  // namespace detail

/// Parses either the compact trace form `MMDD.HH:MM:SS[.mmm]` (year taken from
/// base_year) or ISO-8601 `YYYY-MM-DD[T ]HH:MM:SS[.mmm][Z]`. Everything is UTC.
inline TimestampMs parse_timestamp(std::string_view text, int base_year) {
    using namespace detail;
    int y, mo, d, h, mi, s, ms = 0;

    // Compact form: 4 digits, '.', HH:MM:SS
    if (text.size() >= 13 && text[4] == '.' && text[7] == ':' && text[10] == ':') {
        if (parse_uint(text, 0, 2, mo) && parse_uint(text, 2, 2, d) &&
            parse_uint(text, 5, 2, h) && parse_uint(text, 8, 2, mi) &&
            parse_uint(text, 11, 2, s)) {
            std::size_t rest = 13;
            if (rest < text.size() && text[rest] == '.') {
                if (!parse_uint(text, rest + 1, 3, ms))
                    throw format_error("invalid timestamp: " + std::string(text));
                rest += 4;
            }
            if (rest != text.size())
                throw format_error("invalid timestamp: " + std::string(text));
            return assemble(base_year, mo, d, h, mi, s, ms, text);
        }
    }

    // ISO-8601
    if (text.size() >= 19 && text[4] == '-' && text[7] == '-' &&
        (text[10] == 'T' || text[10] == ' ') && text[13] == ':' && text[16] == ':') {
        if (parse_uint(text, 0, 4, y) && parse_uint(text, 5, 2, mo) &&
            parse_uint(text, 8, 2, d) && parse_uint(text, 11, 2, h) &&
            parse_uint(text, 14, 2, mi) && parse_uint(text, 17, 2, s)) {
            std::size_t rest = 19;
            if (rest < text.size() && text[rest] == '.') {
                if (!parse_uint(text, rest + 1, 3, ms))
                    throw format_error("invalid timestamp: " + std::string(text));
                rest += 4;
            }
            if (rest < text.size() && text[rest] == 'Z') ++rest;
            if (rest != text.size())
                throw format_error("invalid timestamp: " + std::string(text));
            return assemble(y, mo, d, h, mi, s, ms, text);
        }
    }

    throw format_error("invalid timestamp: " + std::string(text));
}

/// Calendar month of a timestamp in UTC, formatted "YYYY-MM".
inline std::string month_period(TimestampMs ts) {
    std::int64_t days = ts / 86400000;
    if (ts < 0 && ts % 86400000 != 0) --days;
    int y, m, d;
    detail::civil_from_days(days, y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d", y, m);
    return buf;
}

/// ISO-8601 rendering, used in diagnostics and the DHCP/session writers.
inline std::string format_timestamp(TimestampMs ts) {
    std::int64_t days = ts / 86400000;
    std::int64_t rem = ts % 86400000;
    if (rem < 0) {
        rem += 86400000;
        --days;
    }
    int y, m, d;
    detail::civil_from_days(days, y, m, d);
    int msec = static_cast<int>(rem % 1000);
    int sec = static_cast<int>(rem / 1000 % 60);
    int min = static_cast<int>(rem / 60000 % 60);
    int hour = static_cast<int>(rem / 3600000);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03d", y, m, d, hour,
                  min, sec, msec);
    return buf;
}

}  // namespace trendmap
