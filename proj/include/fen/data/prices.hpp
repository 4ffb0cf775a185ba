#pragma once

// Daily price ingestion and weekly downsampling.
//
// Price CSV: header `date,symbol,close`, ISO-8601 dates, decimal closes. An
// empty close field marks a missing observation.
// Volatility-index CSV: header `date,close`.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fen/core/error.hpp"
#include "fen/data/csv.hpp"
#include "fen/data/date.hpp"

namespace fen {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

/// Closing prices on a date x symbol grid; NaN marks a missing close.
struct PricePanel {
    std::vector<Date> dates;  // strictly ascending
    std::vector<std::string> symbols;
    std::vector<double> closes;  // dates.size() x symbols.size(), row-major

    std::size_t num_dates() const { return dates.size(); }
    std::size_t num_symbols() const { return symbols.size(); }
    double close(std::size_t d, std::size_t s) const { return closes[d * symbols.size() + s]; }
};

/// Parses price rows. When `universe` is non-empty, symbols keep its order
/// and any other symbol is rejected; otherwise symbols are sorted.
inline PricePanel parse_prices(const std::vector<std::string>& lines, const std::vector<std::string>& universe = {},
                               const std::string& source = "prices") {
    if (lines.empty() || csv::trim(lines[0]) != "date,symbol,close") {
        if (lines.empty() || csv::trim(lines[0]).empty()) throw DataError(source + ": no rows");
        throw DataError(source + ": header must be 'date,symbol,close'");
    }
    std::map<std::pair<Date, std::string>, double> rows;
    std::set<std::string> seen;
    const std::set<std::string> allowed(universe.begin(), universe.end());
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto line = csv::trim(lines[i]);
        if (line.empty()) continue;
        const std::string where = source + " line " + std::to_string(i + 1);
        const auto f = csv::split(line);
        if (f.size() != 3) throw DataError(where + ": expected 3 fields, got " + std::to_string(f.size()));
        Date d;
        try {
            d = Date::parse(csv::trim(f[0]));
        } catch (const DataError& e) {
            throw DataError(where + ": " + e.what());
        }
        const auto sym = csv::trim(f[1]);
        if (sym.empty()) throw DataError(where + ": empty symbol");
        if (!allowed.empty() && !allowed.count(sym)) throw DataError(where + ": unknown symbol '" + sym + "'");
        const auto close_text = csv::trim(f[2]);
        const double close = close_text.empty() ? kMissing : csv::parse_double(close_text, where);
        if (!rows.emplace(std::make_pair(d, sym), close).second) {
            throw DataError(where + ": duplicate row for " + d.str() + " " + sym);
        }
        seen.insert(sym);
    }
    if (rows.empty()) throw DataError(source + ": no rows");

    PricePanel panel;
    panel.symbols = universe.empty() ? std::vector<std::string>(seen.begin(), seen.end()) : universe;
    std::map<std::string, std::size_t> col;
    for (std::size_t s = 0; s < panel.symbols.size(); ++s) col[panel.symbols[s]] = s;
    for (const auto& [key, v] : rows) {
        if (panel.dates.empty() || panel.dates.back() != key.first) panel.dates.push_back(key.first);
    }
    panel.closes.assign(panel.dates.size() * panel.symbols.size(), kMissing);
    std::size_t di = 0;
    for (const auto& [key, v] : rows) {
        while (panel.dates[di] != key.first) ++di;
        panel.closes[di * panel.symbols.size() + col[key.second]] = v;
    }
    return panel;
}

inline PricePanel load_prices(const std::string& path, const std::vector<std::string>& universe = {}) {
    return parse_prices(csv::read_lines(path), universe, path);
}

struct DailySeries {
    std::vector<Date> dates;
    std::vector<double> values;
};

inline DailySeries parse_index_series(const std::vector<std::string>& lines, const std::string& source = "index") {
    if (lines.empty() || csv::trim(lines[0]).empty()) throw DataError(source + ": no rows");
    if (csv::trim(lines[0]) != "date,close") throw DataError(source + ": header must be 'date,close'");
    std::map<Date, double> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto line = csv::trim(lines[i]);
        if (line.empty()) continue;
        const std::string where = source + " line " + std::to_string(i + 1);
        const auto f = csv::split(line);
        if (f.size() != 2) throw DataError(where + ": expected 2 fields");
        Date d;
        try {
            d = Date::parse(csv::trim(f[0]));
        } catch (const DataError& e) {
            throw DataError(where + ": " + e.what());
        }
        if (!rows.emplace(d, csv::parse_double(csv::trim(f[1]), where)).second) {
            throw DataError(where + ": duplicate date " + d.str());
        }
    }
    if (rows.empty()) throw DataError(source + ": no rows");
    DailySeries out;
    for (const auto& [d, v] : rows) {
        out.dates.push_back(d);
        out.values.push_back(v);
    }
    return out;
}

inline DailySeries load_index_series(const std::string& path) {
    return parse_index_series(csv::read_lines(path), path);
}

/// Weekly closes. week_ends ascending; closes is weeks x symbols.
struct WeeklyPanel {
    std::vector<Date> week_ends;
    std::vector<std::string> symbols;
    std::vector<double> closes;

    std::size_t num_weeks() const { return week_ends.size(); }
    double close(std::size_t w, std::size_t s) const { return closes[w * symbols.size() + s]; }
};

struct WeeklyOptions {
    /// ISO weekday (1 = Monday .. 7 = Sunday) used as the anchor. Unset means
    /// the last date of each ISO week present in the panel.
    std::optional<unsigned> anchor_weekday;
    /// A symbol's last close may be at most this many panel dates old.
    std::size_t max_fill_days = 5;
};

/// Samples the last available close at or before each week's anchor. Weeks
/// where any symbol's most recent close is older than max_fill_days panel
/// dates (or absent) are dropped for every symbol.
inline WeeklyPanel to_weekly(const PricePanel& panel, const WeeklyOptions& opt = {}) {
    if (opt.anchor_weekday && (*opt.anchor_weekday < 1 || *opt.anchor_weekday > 7)) {
        throw ConfigError("anchor weekday must be 1..7");
    }
    WeeklyPanel out;
    out.symbols = panel.symbols;
    const std::size_t ns = panel.num_symbols();
    std::size_t i = 0;
    while (i < panel.num_dates()) {
        const int week = panel.dates[i].iso_week_key();
        std::size_t last = i;
        while (last + 1 < panel.num_dates() && panel.dates[last + 1].iso_week_key() == week) ++last;
        Date anchor = panel.dates[last];
        std::optional<std::size_t> anchor_idx = last;
        if (opt.anchor_weekday) {
            anchor = Date(week) + static_cast<int>(*opt.anchor_weekday - 1);
            anchor_idx.reset();
            for (std::size_t j = last + 1; j-- > 0;) {
                if (panel.dates[j] <= anchor) {
                    anchor_idx = j;
                    break;
                }
            }
        }
        i = last + 1;
        if (!anchor_idx) continue;
        std::vector<double> row(ns, kMissing);
        bool ok = true;
        for (std::size_t s = 0; s < ns && ok; ++s) {
            std::optional<std::size_t> obs;
            for (std::size_t j = *anchor_idx + 1; j-- > 0;) {
                if (!std::isnan(panel.close(j, s))) {
                    obs = j;
                    break;
                }
                if (*anchor_idx - j >= opt.max_fill_days) break;
            }
            if (!obs || *anchor_idx - *obs > opt.max_fill_days) {
                ok = false;
            } else {
                row[s] = panel.close(*obs, s);
            }
        }
        if (!ok) continue;
        out.week_ends.push_back(anchor);
        out.closes.insert(out.closes.end(), row.begin(), row.end());
    }
    return out;
}

/// Simple returns between consecutive weekly closes. Row w holds the return
/// from week_ends[w-1] to week_ends[w]; the first week therefore has none and
/// `week_ends` here starts at the second weekly close.
struct ReturnPanel {
    std::vector<Date> week_ends;
    std::vector<std::string> symbols;
    std::vector<double> returns;  // weeks x symbols

    std::size_t num_weeks() const { return week_ends.size(); }
    double at(std::size_t w, std::size_t s) const { return returns[w * symbols.size() + s]; }
    std::vector<double> column(std::size_t s) const {
        std::vector<double> out(num_weeks());
        for (std::size_t w = 0; w < out.size(); ++w) out[w] = at(w, s);
        return out;
    }
};

inline ReturnPanel weekly_returns(const WeeklyPanel& weekly) {
    if (weekly.num_weeks() < 2) throw DataError("weekly returns need at least 2 weeks");
    const std::size_t ns = weekly.symbols.size();
    for (std::size_t w = 0; w < weekly.num_weeks(); ++w) {
        for (std::size_t s = 0; s < ns; ++s) {
            if (!(weekly.close(w, s) > 0.0)) {
                throw DataError("nonpositive price for " + weekly.symbols[s] + " on " + weekly.week_ends[w].str());
            }
        }
    }
    ReturnPanel out;
    out.symbols = weekly.symbols;
    for (std::size_t w = 1; w < weekly.num_weeks(); ++w) {
        out.week_ends.push_back(weekly.week_ends[w]);
        for (std::size_t s = 0; s < ns; ++s) out.returns.push_back(weekly.close(w, s) / weekly.close(w - 1, s) - 1.0);
    }
    return out;
}

}  // namespace fen
