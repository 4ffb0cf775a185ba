#pragma once

// Attention heatmap aggregation. Every heatmap is an n x n row-stochastic
// matrix from the last target-stack layer at one rebalance.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fen/core/error.hpp"
#include "fen/core/tensor.hpp"
#include "fen/data/date.hpp"
#include "fen/data/regimes.hpp"
#include "fen/ltr/ranking.hpp"

namespace fen {

inline constexpr double kRowSumTolerance = 1e-9;

struct Heatmap {
    Date date;
    std::vector<std::string> ids;  // row/column order
    Tensor weights;                // n x n
    std::vector<double> scores;    // model scores at this rebalance, aligned with ids
    std::optional<Regime> regime;
};

struct HeatmapBundle {
    std::vector<Heatmap> entries;
};

inline void validate_heatmap(const Heatmap& h) {
    const std::size_t n = h.ids.size();
    if (h.weights.shape() != Shape{n, n}) {
        throw ShapeError("heatmap for " + h.date.str() + " is " + shape_str(h.weights.shape()) + ", expected " +
                         std::to_string(n) + "x" + std::to_string(n));
    }
    if (!h.scores.empty() && h.scores.size() != n) throw ShapeError("heatmap scores not aligned with instruments");
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += h.weights(i, j);
        if (std::abs(s - 1.0) > kRowSumTolerance) {
            throw DataError("heatmap row " + std::to_string(i) + " on " + h.date.str() + " sums to " + std::to_string(s));
        }
    }
}

/// Re-indexes a heatmap's rows and columns into universe order.
inline Tensor in_universe_order(const Heatmap& h, const std::vector<std::string>& universe) {
    if (h.ids == universe) return h.weights;
    if (h.ids.size() != universe.size()) throw DataError("heatmap on " + h.date.str() + " has a different universe size");
    std::vector<std::size_t> pos(universe.size());
    for (std::size_t u = 0; u < universe.size(); ++u) {
        auto it = std::find(h.ids.begin(), h.ids.end(), universe[u]);
        if (it == h.ids.end()) throw DataError("heatmap on " + h.date.str() + " lacks instrument " + universe[u]);
        pos[u] = static_cast<std::size_t>(it - h.ids.begin());
    }
    Tensor out = Tensor::matrix(universe.size(), universe.size());
    for (std::size_t a = 0; a < universe.size(); ++a)
        for (std::size_t b = 0; b < universe.size(); ++b) out(a, b) = h.weights(pos[a], pos[b]);
    return out;
}

struct DateRange {
    std::string name;
    Date first;  // inclusive
    Date last;   // inclusive
};

struct HeatmapAggregate {
    std::map<std::string, Tensor> groups;  // group name -> mean matrix in universe order
    std::map<std::string, std::size_t> counts;
    std::vector<std::string> warnings;  // one per empty group
};

namespace detail {

template <class Key>
HeatmapAggregate aggregate_by(const HeatmapBundle& bundle, const std::vector<std::string>& universe,
                              const std::vector<std::string>& group_names, const Key& groups_of) {
    HeatmapAggregate out;
    const std::size_t n = universe.size();
    std::map<std::string, Tensor> sums;
    for (const auto& h : bundle.entries) {
        validate_heatmap(h);
        const Tensor w = in_universe_order(h, universe);
        for (const auto& g : groups_of(h)) {
            auto [it, fresh] = sums.try_emplace(g, Tensor::matrix(n, n));
            for (std::size_t i = 0; i < w.size(); ++i) it->second[i] += w[i];
            ++out.counts[g];
        }
    }
    for (const auto& g : group_names) {
        auto it = sums.find(g);
        if (it == sums.end()) {
            out.warnings.push_back("heatmap group '" + g + "' has no members and is omitted");
            continue;
        }
        Tensor mean = it->second;
        for (auto& v : mean.storage()) v /= static_cast<double>(out.counts[g]);
        out.groups.emplace(g, std::move(mean));
    }
    return out;
}

}  // namespace detail

/// Elementwise mean per regime ("normal", "risk_off"); unlabelled weeks are skipped.
inline HeatmapAggregate aggregate_heatmaps(const HeatmapBundle& bundle, const std::vector<std::string>& universe) {
    return detail::aggregate_by(bundle, universe, {"normal", "risk_off"}, [](const Heatmap& h) {
        std::vector<std::string> g;
        if (h.regime) g.emplace_back(regime_name(*h.regime));
        return g;
    });
}

/// Elementwise mean per named date range; ranges may overlap.
inline HeatmapAggregate aggregate_heatmaps(const HeatmapBundle& bundle, const std::vector<std::string>& universe,
                                           const std::vector<DateRange>& ranges) {
    std::vector<std::string> names;
    for (const auto& r : ranges) names.push_back(r.name);
    return detail::aggregate_by(bundle, universe, names, [&](const Heatmap& h) {
        std::vector<std::string> g;
        for (const auto& r : ranges) {
            if (!(h.date < r.first) && !(r.last < h.date)) g.push_back(r.name);
        }
        return g;
    });
}

/// Column means of one heatmap after re-indexing columns by predicted rank
/// (index 0 = lowest score).
inline std::vector<double> rank_column_means(const Heatmap& h) {
    validate_heatmap(h);
    if (h.scores.size() != h.ids.size()) throw DataError("heatmap on " + h.date.str() + " has no scores to rank by");
    const std::size_t n = h.ids.size();
    const auto order = rank_order(h.scores, h.ids);
    std::vector<double> out(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t i = 0; i < n; ++i) out[r] += h.weights(i, order[r]);
        out[r] /= static_cast<double>(n);
    }
    return out;
}

struct ColumnAverages {
    std::map<std::string, std::vector<double>> groups;  // regime name -> mean per rank index
    std::map<std::string, std::size_t> counts;
};

namespace detail {

template <class Key>
ColumnAverages column_averages_by(const HeatmapBundle& bundle, const Key& groups_of) {
    ColumnAverages out;
    for (const auto& h : bundle.entries) {
        const auto groups = groups_of(h);
        if (groups.empty()) continue;
        const auto means = rank_column_means(h);
        for (const auto& g : groups) {
            auto [it, fresh] = out.groups.try_emplace(g, std::vector<double>(means.size(), 0.0));
            if (it->second.size() != means.size()) throw DataError("heatmaps differ in universe size");
            for (std::size_t r = 0; r < means.size(); ++r) it->second[r] += means[r];
            ++out.counts[g];
        }
    }
    for (auto& [g, v] : out.groups) {
        for (auto& x : v) x /= static_cast<double>(out.counts[g]);
    }
    return out;
}

}  // namespace detail

/// Per-regime mean of the rank-indexed column means.
inline ColumnAverages column_averages(const HeatmapBundle& bundle) {
    return detail::column_averages_by(bundle, [](const Heatmap& h) {
        std::vector<std::string> g;
        if (h.regime) g.emplace_back(regime_name(*h.regime));
        return g;
    });
}

inline ColumnAverages column_averages(const HeatmapBundle& bundle, const std::vector<DateRange>& ranges) {
    return detail::column_averages_by(bundle, [&](const Heatmap& h) {
        std::vector<std::string> g;
        for (const auto& r : ranges) {
            if (!(h.date < r.first) && !(r.last < h.date)) g.push_back(r.name);
        }
        return g;
    });
}

/// Trading side of a rank index (0-based, lowest first) given top_m positions per side.
inline const char* rank_position(std::size_t rank, std::size_t n, std::size_t top_m) {
    if (rank < top_m) return "short";
    if (rank + top_m >= n) return "long";
    return "none";
}

}  // namespace fen
