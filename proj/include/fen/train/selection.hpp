#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "fen/core/error.hpp"

namespace fen {

enum class SelectionMode { Best, Worst };

inline const char* selection_mode_name(SelectionMode m) { return m == SelectionMode::Best ? "best" : "worst"; }

inline SelectionMode parse_selection_mode(const std::string& s) {
    if (s == "best") return SelectionMode::Best;
    if (s == "worst") return SelectionMode::Worst;
    throw ConfigError("selection mode must be 'best' or 'worst', got '" + s + "'");
}

struct SourceCandidate {
    std::string run_id;
    std::uint64_t seed = 0;
    std::optional<double> sharpe;  // Sharpe over the year before the target test year; empty = no backtest
};

struct SourceSelection {
    int year = 0;  // target test year
    SelectionMode mode = SelectionMode::Best;
    std::vector<SourceCandidate> candidates;
    std::vector<std::size_t> chosen;  // indices into candidates, in selection order
};

/// Ranks candidates by prior-year Sharpe (descending for Best, ascending for
/// Worst) and keeps the first `take`. Equal Sharpes fall back to ascending seed.
inline SourceSelection select_source(std::vector<SourceCandidate> candidates, int year, SelectionMode mode,
                                     std::size_t take = 2) {
    if (take == 0 || take > candidates.size()) {
        throw ConfigError("cannot select " + std::to_string(take) + " of " + std::to_string(candidates.size()) +
                          " source candidates");
    }
    std::string missing;
    for (const auto& c : candidates) {
        if (!c.sharpe) missing += (missing.empty() ? "" : ", ") + c.run_id;
    }
    if (!missing.empty()) {
        throw DataError("source candidates without a backtest for " + std::to_string(year - 1) + ": " + missing);
    }
    std::vector<std::size_t> idx(candidates.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const double sa = *candidates[a].sharpe, sb = *candidates[b].sharpe;
        if (sa != sb) return mode == SelectionMode::Best ? sa > sb : sa < sb;
        return candidates[a].seed < candidates[b].seed;
    });
    SourceSelection out;
    out.year = year;
    out.mode = mode;
    out.chosen.assign(idx.begin(), idx.begin() + static_cast<long>(take));
    out.candidates = std::move(candidates);
    return out;
}

}  // namespace fen
