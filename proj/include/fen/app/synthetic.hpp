#pragma once

// Synthetic markets with planted cross-sectional momentum. Each instrument's
// volatility-normalised weekly return follows z[t+1] = phi * z[t] + sqrt(1 - phi^2) * e,
// so next-week returns are a noisy linear function of last week's
// normalised return. Daily closes are a Brownian bridge inside each week that
// lands exactly on the weekly close.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fen/core/error.hpp"
#include "fen/data/csv.hpp"
#include "fen/data/prices.hpp"
#include "fen/ltr/sample.hpp"

namespace fen {

struct SyntheticMarket {
    std::vector<std::string> symbols;
    Date start;                 // must be a Monday
    std::size_t weeks = 300;
    bool weekdays_only = false; // false = all seven calendar days trade
    double phi = 0.3;
    double vol_low = 0.3;       // annualised vol range across instruments
    double vol_high = 0.9;
    std::uint64_t seed = 0;
};

inline std::vector<std::string> synthetic_symbols(const std::string& prefix, std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) {
        char buf[24];
        std::snprintf(buf, sizeof buf, "%02zu", i);
        out.push_back(prefix + buf);
    }
    return out;
}

inline PricePanel generate_market(const SyntheticMarket& m) {
    if (m.symbols.empty() || m.weeks < 2) throw ConfigError("synthetic market needs symbols and at least 2 weeks");
    if (m.start.iso_weekday() != 1) throw ConfigError("synthetic market must start on a Monday");
    if (!(std::abs(m.phi) < 1.0)) throw ConfigError("phi must lie in (-1, 1)");
    const std::size_t ns = m.symbols.size();
    const int days_per_week = m.weekdays_only ? 5 : 7;
    std::mt19937_64 rng(m.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(m.vol_low, m.vol_high);

    std::vector<double> sigma(ns), z(ns), close(ns, 100.0);
    for (std::size_t s = 0; s < ns; ++s) {
        sigma[s] = unif(rng) / std::sqrt(52.0);
        z[s] = normal(rng);
    }
    const double innov = std::sqrt(1.0 - m.phi * m.phi);

    PricePanel p;
    p.symbols = m.symbols;
    // One opening day so the first week has a starting close.
    p.dates.push_back(m.start - 1);
    p.closes.insert(p.closes.end(), close.begin(), close.end());
    std::vector<double> bridge(static_cast<std::size_t>(days_per_week));
    std::vector<std::vector<double>> path(ns, std::vector<double>(bridge.size()));
    for (std::size_t w = 0; w < m.weeks; ++w) {
        for (std::size_t s = 0; s < ns; ++s) {
            z[s] = m.phi * z[s] + innov * normal(rng);
            const double weekly = std::exp(sigma[s] * z[s] - 0.5 * sigma[s] * sigma[s]) - 1.0;
            const double target_log = std::log1p(weekly);
            double mean = 0.0;
            for (auto& b : bridge) mean += (b = normal(rng) * sigma[s] / std::sqrt(days_per_week));
            mean /= static_cast<double>(bridge.size());
            double cum = 0.0;
            for (std::size_t d = 0; d < bridge.size(); ++d) {
                cum += bridge[d] - mean + target_log / static_cast<double>(bridge.size());
                path[s][d] = close[s] * std::exp(cum);
            }
            path[s].back() = close[s] * (1.0 + weekly);
            close[s] = path[s].back();
        }
        const Date monday = m.start + static_cast<int>(7 * w);
        for (int d = 0; d < days_per_week; ++d) {
            p.dates.push_back(monday + d);
            for (std::size_t s = 0; s < ns; ++s) p.closes.push_back(path[s][static_cast<std::size_t>(d)]);
        }
    }
    return p;
}

/// Daily risk index: log-AR(1) around a level with occasional jumps, so some
/// weeks cross 1.05 x the 60-day average.
inline DailySeries generate_index(Date first, Date last, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    DailySeries out;
    double x = 0.0;
    for (Date d = first; d <= last; d = d + 1) {
        x = 0.97 * x + 0.05 * normal(rng) + (unif(rng) < 0.01 ? 0.4 : 0.0);
        out.dates.push_back(d);
        out.values.push_back(20.0 * std::exp(x));
    }
    return out;
}

inline std::string prices_to_csv(const PricePanel& p) {
    std::string out = "date,symbol,close\n";
    for (std::size_t d = 0; d < p.num_dates(); ++d) {
        const std::string ds = p.dates[d].str();
        for (std::size_t s = 0; s < p.num_symbols(); ++s) {
            const double c = p.close(d, s);
            if (std::isnan(c)) continue;
            out += ds + "," + p.symbols[s] + "," + csv::fmt(c) + "\n";
        }
    }
    return out;
}

inline std::string index_to_csv(const DailySeries& s) {
    std::string out = "date,close\n";
    for (std::size_t i = 0; i < s.dates.size(); ++i) out += s.dates[i].str() + "," + csv::fmt(s.values[i]) + "\n";
    return out;
}

/// Destroys the feature/label relation: labels and regression targets are
/// permuted together within every list. Realised returns stay put.
inline std::vector<RankingSample> shuffle_labels(std::vector<RankingSample> samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& s : samples) {
        std::vector<std::size_t> perm(s.size());
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        std::shuffle(perm.begin(), perm.end(), rng);
        auto labels = s.labels;
        auto targets = s.targets;
        for (std::size_t i = 0; i < perm.size(); ++i) {
            s.labels[i] = labels[perm[i]];
            s.targets[i] = targets[perm[i]];
        }
    }
    return samples;
}

}  // namespace fen
