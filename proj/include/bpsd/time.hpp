// ============================================================================
// time.hpp - UTC instants, ISO-8601 parsing, 15-minute slot arithmetic
// ============================================================================
#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace bpsd {

/// Seconds since the Unix epoch, always UTC.
using Instant = std::int64_t;

inline constexpr std::int64_t kSlotSeconds = 15 * 60;
inline constexpr std::int64_t kDaySeconds = 24 * 3600;

inline constexpr Instant floor_to(Instant t, std::int64_t step) {
    Instant q = t / step;
    if (t % step != 0 && t < 0) --q;
    return q * step;
}

inline constexpr Instant floor_to_slot(Instant t) { return floor_to(t, kSlotSeconds); }
inline constexpr Instant floor_to_day(Instant t) { return floor_to(t, kDaySeconds); }

inline Instant make_utc(int year, unsigned month, unsigned day,
                        int hour = 0, int minute = 0, int second = 0) {
    using namespace std::chrono;
    const sys_days days{year_month_day{std::chrono::year{year}, std::chrono::month{month},
                                       std::chrono::day{day}}};
    return days.time_since_epoch().count() * kDaySeconds +
           hour * 3600LL + minute * 60LL + second;
}

namespace detail {

inline bool parse_digits(std::string_view s, std::size_t pos, std::size_t n, int& out) {
    if (pos + n > s.size()) return false;
    int v = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const char c = s[pos + i];
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
    }
    out = v;
    return true;
}

} // namespace detail

/// Parses "YYYY-MM-DDTHH:MM:SS" followed by "Z" or "+HH:MM"/"-HH:MM".
/// A space is accepted in place of 'T'. Returns the UTC instant.
inline std::optional<Instant> parse_iso8601(std::string_view s) {
    using detail::parse_digits;
    int y, mo, d, hh, mi, ss;
    if (!parse_digits(s, 0, 4, y) || !parse_digits(s, 5, 2, mo) || !parse_digits(s, 8, 2, d) ||
        !parse_digits(s, 11, 2, hh) || !parse_digits(s, 14, 2, mi) || !parse_digits(s, 17, 2, ss))
        return std::nullopt;
    if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
        s[13] != ':' || s[16] != ':')
        return std::nullopt;
    if (hh > 23 || mi > 59 || ss > 60) return std::nullopt;

    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(mo)},
                                          std::chrono::day{unsigned(d)}};
    if (!ymd.ok()) return std::nullopt;

    std::int64_t offset = 0;
    if (s.size() == 20 && s[19] == 'Z') {
        offset = 0;
    } else if (s.size() == 25 && (s[19] == '+' || s[19] == '-') && s[22] == ':') {
        int oh, om;
        if (!parse_digits(s, 20, 2, oh) || !parse_digits(s, 23, 2, om)) return std::nullopt;
        if (oh > 14 || om > 59) return std::nullopt;
        offset = oh * 3600LL + om * 60LL;
        if (s[19] == '-') offset = -offset;
    } else {
        return std::nullopt;
    }

    const Instant local = make_utc(y, unsigned(mo), unsigned(d), hh, mi, ss);
    return local - offset;
}

/// Formats as "YYYY-MM-DDTHH:MM:SS+00:00".
inline std::string format_iso8601_utc(Instant t) {
    using namespace std::chrono;
    const Instant day = floor_to_day(t);
    const std::int64_t sod = t - day;
    const year_month_day ymd{sys_days{days{day / kDaySeconds}}};
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02d+00:00",
                  int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day()),
                  int(sod / 3600), int((sod / 60) % 60), int(sod % 60));
    return buf;
}

} // namespace bpsd
