#pragma once

// Returns conditioned on which of two models ranked more accurately.

#include <string>
#include <vector>

#include "fen/backtest/engine.hpp"
#include "fen/core/error.hpp"

namespace fen {

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample std, 0 for a single observation
};

inline MeanStd mean_std(std::span<const double> x) {
    if (x.empty()) throw DataError("mean of an empty set");
    return {sample_mean(x), sample_std(x)};
}

struct Segment {
    std::string partition;  // "a_more_accurate" (ties included) or "b_more_accurate"
    std::size_t count = 0;
    MeanStd ndcg_a, ndcg_b, return_a, return_b;
};

/// Pools rebalances over every (a, b) run pair. Each pair must share its
/// rebalance dates. Empty partitions are omitted.
inline std::vector<Segment> segmented_returns(std::span<const BacktestSeries> runs_a,
                                              std::span<const BacktestSeries> runs_b) {
    if (runs_a.size() != runs_b.size() || runs_a.empty()) {
        throw DataError("segmented returns need the same positive number of runs for both models");
    }
    std::vector<double> na[2], nb[2], ra[2], rb[2];
    for (std::size_t r = 0; r < runs_a.size(); ++r) {
        const auto& a = runs_a[r];
        const auto& b = runs_b[r];
        if (a.dates != b.dates) {
            std::string where = "run " + std::to_string(r);
            for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
                if (a.dates[i] != b.dates[i]) {
                    where += ", first difference at " + a.dates[i].str() + " vs " + b.dates[i].str();
                    break;
                }
            }
            throw DataError("segmented returns: rebalance dates of the two models are misaligned (" + where + ")");
        }
        for (std::size_t i = 0; i < a.size(); ++i) {
            const int p = b.ndcg[i] > a.ndcg[i] ? 1 : 0;
            na[p].push_back(a.ndcg[i]);
            nb[p].push_back(b.ndcg[i]);
            ra[p].push_back(a.net[i]);
            rb[p].push_back(b.net[i]);
        }
    }
    std::vector<Segment> out;
    const char* names[2] = {"a_more_accurate", "b_more_accurate"};
    for (int p = 0; p < 2; ++p) {
        if (na[p].empty()) continue;
        out.push_back({names[p], na[p].size(), mean_std(na[p]), mean_std(nb[p]), mean_std(ra[p]), mean_std(rb[p])});
    }
    return out;
}

}  // namespace fen
