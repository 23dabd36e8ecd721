#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "alphacast/errors.hpp"

namespace alphacast {

/// Instants are UTC seconds since the Unix epoch. All calendar arithmetic in
/// the pipeline is fixed-frequency stepping over these values.
using Instant = std::int64_t;

namespace detail {

// Days-from-civil / civil-from-days (Howard Hinnant's algorithms), valid far
// beyond any dataset range we care about.
inline std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yr = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y = static_cast<int>(yr + (m <= 2));
}

inline bool parse_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) return false;
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
        if (s[i] < '0' || s[i] > '9') return false;
        v = v * 10 + (s[i] - '0');
    }
    out = v;
    return true;
}

} // namespace detail

/// Parses "YYYY-MM-DD", "YYYY-MM-DD HH:MM", "YYYY-MM-DD HH:MM:SS", with an
/// optional 'T' separator. Everything is treated as UTC.
inline Instant parse_instant(std::string_view text) {
    int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
    auto fail = [&] {
        throw Error(ErrorKind::parse_error, "bad timestamp '" + std::string(text) + "'");
    };
    if (text.size() < 10) fail();
    if (!detail::parse_int(text, 0, 4, year) || text[4] != '-' ||
        !detail::parse_int(text, 5, 2, month) || text[7] != '-' ||
        !detail::parse_int(text, 8, 2, day))
        fail();
    if (text.size() > 10) {
        if (text[10] != ' ' && text[10] != 'T') fail();
        if (text.size() < 16) fail();
        if (!detail::parse_int(text, 11, 2, hour) || text[13] != ':' ||
            !detail::parse_int(text, 14, 2, minute))
            fail();
        if (text.size() > 16) {
            if (text[16] != ':' || text.size() < 19 || !detail::parse_int(text, 17, 2, second))
                fail();
            if (text.size() > 19) fail();
        }
    }
    if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60)
        fail();
    return detail::days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day)) * 86400
         + hour * 3600 + minute * 60 + second;
}

/// Canonical rendering, "YYYY-MM-DD HH:MM:SS".
inline std::string format_instant(Instant t) {
    std::int64_t days = t / 86400;
    std::int64_t rem = t % 86400;
    if (rem < 0) { rem += 86400; days -= 1; }
    int y; unsigned m, d;
    detail::civil_from_days(days, y, m, d);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u %02lld:%02lld:%02lld",
                  y, m, d, static_cast<long long>(rem / 3600),
                  static_cast<long long>((rem % 3600) / 60), static_cast<long long>(rem % 60));
    return buf;
}

/// Sampling frequency: a step in seconds plus the original spelling.
struct Frequency {
    std::int64_t step_seconds = 0;
    std::string text;

    bool operator==(const Frequency&) const = default;
};

/// Accepts "<n><unit>" with unit in {s, sec, min, h, hour, d, day} (plural
/// forms allowed), e.g. "1h", "15min", "1d".
inline Frequency parse_frequency(std::string_view text) {
    std::size_t i = 0;
    std::int64_t n = 0;
    while (i < text.size() && text[i] >= '0' && text[i] <= '9') {
        n = n * 10 + (text[i] - '0');
        ++i;
    }
    std::string unit(text.substr(i));
    if (n <= 0 || unit.empty())
        throw Error(ErrorKind::parse_error, "bad frequency '" + std::string(text) + "'");
    std::int64_t mult = 0;
    if (unit == "s" || unit == "sec" || unit == "secs") mult = 1;
    else if (unit == "min" || unit == "mins") mult = 60;
    else if (unit == "h" || unit == "hour" || unit == "hours") mult = 3600;
    else if (unit == "d" || unit == "day" || unit == "days") mult = 86400;
    else throw Error(ErrorKind::parse_error, "bad frequency unit '" + unit + "'");
    return Frequency{n * mult, std::string(text)};
}

/// Dominant seasonal period in samples: sub-daily frequencies season on the
/// daily cycle (1h -> 24, 15min -> 96), daily seasons on the week (1d -> 7).
/// Anything coarser falls back to the minimal legal period of 2.
inline int season_period(const Frequency& freq) {
    if (freq.step_seconds <= 0)
        throw Error(ErrorKind::invalid_argument, "frequency not set");
    if (freq.step_seconds < 86400) {
        std::int64_t p = 86400 / freq.step_seconds;
        return p >= 2 ? static_cast<int>(p) : 2;
    }
    if (freq.step_seconds == 86400) return 7;
    return 2;
}

} // namespace alphacast
