#pragma once

#include <charconv>
#include <chrono>
#include <compare>
#include <cstdio>
#include <string>
#include <string_view>

#include "fen/core/error.hpp"

namespace fen {

/// Calendar date as days since 1970-01-01.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(int days) : days_(days) {}

    static Date from_ymd(int y, unsigned m, unsigned d) {
        const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
        if (!ymd.ok()) throw DataError("invalid calendar date");
        return Date(std::chrono::sys_days{ymd}.time_since_epoch().count());
    }

    /// Strict YYYY-MM-DD.
    static Date parse(std::string_view s) {
        auto bad = [&] { return DataError("invalid ISO-8601 date '" + std::string(s) + "'"); };
        if (s.size() != 10 || s[4] != '-' || s[7] != '-') throw bad();
        int y = 0;
        unsigned m = 0, d = 0;
        auto ok = [](std::from_chars_result r, const char* end) { return r.ec == std::errc() && r.ptr == end; };
        if (!ok(std::from_chars(s.data(), s.data() + 4, y), s.data() + 4) ||
            !ok(std::from_chars(s.data() + 5, s.data() + 7, m), s.data() + 7) ||
            !ok(std::from_chars(s.data() + 8, s.data() + 10, d), s.data() + 10)) {
            throw bad();
        }
        const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
        if (!ymd.ok()) throw bad();
        return Date(std::chrono::sys_days{ymd}.time_since_epoch().count());
    }

    constexpr int days() const { return days_; }

    std::chrono::year_month_day ymd() const { return std::chrono::year_month_day{sys()}; }
    int year() const { return static_cast<int>(ymd().year()); }

    /// ISO weekday: Monday = 1 ... Sunday = 7.
    unsigned iso_weekday() const { return std::chrono::weekday{sys()}.iso_encoding(); }

    /// Key identifying the ISO week (the Monday that starts it).
    int iso_week_key() const { return days_ - static_cast<int>(iso_weekday() - 1); }

    std::string str() const {
        const auto d = ymd();
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                      static_cast<unsigned>(d.day()));
        return buf;
    }

    constexpr Date operator+(int n) const { return Date(days_ + n); }
    constexpr Date operator-(int n) const { return Date(days_ - n); }
    constexpr int operator-(Date o) const { return days_ - o.days_; }
    constexpr auto operator<=>(const Date&) const = default;

private:
    std::chrono::sys_days sys() const { return std::chrono::sys_days{std::chrono::days{days_}}; }

    int days_ = 0;
};

}  // namespace fen
