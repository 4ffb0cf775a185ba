#pragma once

// No-look-ahead audit: for a sample at week t, delete every price after
// week t+1 and scramble the closes inside (t, t+1]. Features, volatilities
// and the resulting positions at t must not move; realised returns must.

#include <cmath>
#include <random>
#include <string>

#include "fen/app/synthetic.hpp"
#include "fen/backtest/engine.hpp"
#include "fen/data/features.hpp"

namespace fen::testing {

struct AuditResult {
    std::size_t checked = 0;
    std::size_t feature_mismatches = 0;
    std::size_t position_mismatches = 0;
    std::size_t labels_unchanged = 0;  // the scramble should move next returns
    std::string first_failure;
};

inline PricePanel truncate_and_scramble(const PricePanel& p, Date keep_through, Date last, std::mt19937_64& rng) {
    PricePanel out;
    out.symbols = p.symbols;
    std::normal_distribution<double> shock(0.0, 0.05);
    for (std::size_t d = 0; d < p.num_dates(); ++d) {
        if (p.dates[d] > last) break;
        out.dates.push_back(p.dates[d]);
        for (std::size_t s = 0; s < p.num_symbols(); ++s) {
            const double c = p.close(d, s);
            out.closes.push_back(p.dates[d] > keep_through ? c * std::exp(shock(rng)) : c);
        }
    }
    return out;
}

inline AuditResult truncation_audit(std::size_t weeks, std::uint64_t seed, std::size_t stride = 1) {
    SyntheticMarket m{synthetic_symbols("A", 8), Date::from_ymd(2016, 1, 4), weeks, false};
    m.seed = seed;
    const PricePanel panel = generate_market(m);
    const FeatureConfig cfg;
    const auto full = prepare_samples(panel, cfg);
    std::mt19937_64 rng(seed + 1);
    AuditResult res;
    for (std::size_t t = 0; t < full.size(); t += stride) {
        const auto& ref = full[t];
        const auto cut = prepare_samples(truncate_and_scramble(panel, ref.date, ref.next_date, rng), cfg);
        ++res.checked;
        if (cut.empty() || cut.back().date != ref.date) {
            ++res.feature_mismatches;
            if (res.first_failure.empty()) res.first_failure = "no sample for " + ref.date.str() + " after truncation";
            continue;
        }
        const auto& got = cut.back();
        if (!(got.features == ref.features) || got.vols != ref.vols) {
            ++res.feature_mismatches;
            if (res.first_failure.empty()) res.first_failure = "features moved at " + ref.date.str();
        }
        std::vector<double> a(ref.size()), b(ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i) {
            a[i] = ref.features(i, cfg.horizons.size());
            b[i] = got.features(i, cfg.horizons.size());
        }
        if (scores_to_signal(a, ref.ids, 2) != scores_to_signal(b, got.ids, 2)) ++res.position_mismatches;
        if (got.next_returns == ref.next_returns) ++res.labels_unchanged;
    }
    return res;
}

}  // namespace fen::testing
