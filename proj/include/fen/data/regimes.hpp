#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fen/core/error.hpp"
#include "fen/data/prices.hpp"

namespace fen {

enum class Regime { Normal, RiskOff };

inline const char* regime_name(Regime r) { return r == Regime::Normal ? "normal" : "risk_off"; }

struct RegimeOptions {
    std::size_t window = 60;     // trading days in the simple moving average
    double threshold = 1.05;     // risk-off when close >= threshold * SMA
};

/// Week i covers the days in (week_ends[i-1], week_ends[i]]; the first week
/// covers the seven days ending at week_ends[0]. A week is risk-off when any
/// contained day closes at or above threshold x its trailing SMA (which
/// includes that day). Weeks with no index observations, or containing a day
/// without a full SMA window, stay unlabelled.
inline std::vector<std::optional<Regime>> label_regimes(const DailySeries& index, const std::vector<Date>& week_ends,
                                                        const RegimeOptions& opt = {}) {
    if (opt.window == 0) throw ConfigError("regime SMA window must be positive");
    const std::size_t nd = index.dates.size();
    std::vector<double> sma(nd, kMissing);
    double run = 0.0;
    for (std::size_t i = 0; i < nd; ++i) {
        run += index.values[i];
        if (i >= opt.window) run -= index.values[i - opt.window];
        if (i + 1 >= opt.window) sma[i] = run / static_cast<double>(opt.window);
    }
    std::vector<std::optional<Regime>> out(week_ends.size());
    std::size_t d = 0;
    for (std::size_t w = 0; w < week_ends.size(); ++w) {
        const Date start = w == 0 ? week_ends[0] - 7 : week_ends[w - 1];
        while (d < nd && index.dates[d] <= start) ++d;
        std::size_t e = d;
        bool any = false, complete = true, risk_off = false;
        while (e < nd && index.dates[e] <= week_ends[w]) {
            any = true;
            if (std::isnan(sma[e])) {
                complete = false;
            } else if (index.values[e] >= opt.threshold * sma[e]) {
                risk_off = true;
            }
            ++e;
        }
        if (any && complete) out[w] = risk_off ? Regime::RiskOff : Regime::Normal;
    }
    return out;
}

}  // namespace fen
