#pragma once

// Listwise ranking utilities: quintile labels, the ListNet loss, NDCG@k and
// score -> long/short signal conversion.
//
// Every place that orders instruments uses the same total order: ascending
// score, ties broken by ascending instrument id (index when no ids are
// given). "Top" means the end of that order.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fen/core/error.hpp"
#include "fen/core/tape.hpp"

namespace fen {

inline constexpr int kNumBins = 5;

enum class Direction { Long, Short };

/// Indices sorted by (value ascending, id ascending). Position 0 is rank 1.
inline std::vector<std::size_t> rank_order(std::span<const double> values, std::span<const std::string> ids = {}) {
    if (!ids.empty() && ids.size() != values.size()) throw ShapeError("rank_order: ids and values differ in length");
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (values[a] != values[b]) return values[a] < values[b];
        if (!ids.empty()) return ids[a] < ids[b];
        return a < b;
    });
    return idx;
}

/// Forced quintile split of next-period returns. Bin sizes are n/5, with the
/// n%5 leftover instruments going one each to the lowest bins.
inline std::vector<int> assign_quintiles(std::span<const double> next_returns, std::span<const std::string> ids = {}) {
    const std::size_t n = next_returns.size();
    if (n < static_cast<std::size_t>(kNumBins)) {
        throw DataError("quintile labels need at least 5 instruments, got " + std::to_string(n));
    }
    const auto order = rank_order(next_returns, ids);
    const std::size_t base = n / kNumBins, extra = n % kNumBins;
    std::vector<int> bins(n);
    std::size_t pos = 0;
    for (int b = 0; b < kNumBins; ++b) {
        const std::size_t count = base + (static_cast<std::size_t>(b) < extra ? 1 : 0);
        for (std::size_t i = 0; i < count; ++i) bins[order[pos++]] = b;
    }
    return bins;
}

inline std::vector<double> softmax(std::span<const double> v) {
    std::vector<double> out(v.size());
    const double mx = *std::max_element(v.begin(), v.end());
    double z = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) z += (out[i] = std::exp(v[i] - mx));
    for (auto& o : out) o /= z;
    return out;
}

/// Cross-entropy between softmax(labels) and softmax(scores); labels enter
/// the softmax as raw bin integers.
inline double listnet_loss(std::span<const int> labels, std::span<const double> scores) {
    if (labels.size() != scores.size()) {
        throw ShapeError("listnet_loss: " + std::to_string(labels.size()) + " labels vs " +
                         std::to_string(scores.size()) + " scores");
    }
    std::vector<double> y(labels.begin(), labels.end());
    const auto p = softmax(y);
    const double mx = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (double s : scores) z += std::exp(s - mx);
    const double lse = mx + std::log(z);
    double loss = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) loss -= p[i] * (scores[i] - lse);
    return loss;
}

/// Differentiable ListNet loss for an n x 1 score column on a tape.
inline ad::Var listnet_loss(ad::Var scores, std::span<const int> labels) {
    const Tensor& s = scores.value();
    if (s.cols() != 1 || s.rows() != labels.size()) {
        throw ShapeError("listnet_loss: scores " + shape_str(s.shape()) + " vs " + std::to_string(labels.size()) +
                         " labels");
    }
    std::vector<double> y(labels.begin(), labels.end());
    auto target = scores.tape().constant(Tensor::row(softmax(y)));
    auto log_p = ad::log_softmax_rows(ad::transpose(scores));
    return ad::scale(ad::sum(ad::mul(target, log_p)), -1.0);
}

/// Mean squared error between an n x 1 score column and regression targets.
inline ad::Var mse_loss(ad::Var scores, std::span<const double> targets) {
    if (scores.value().size() != targets.size()) throw ShapeError("mse_loss: length mismatch");
    auto t = scores.tape().constant(Tensor::column(targets));
    auto diff = ad::sub(scores, t);
    return ad::mean(ad::mul(diff, diff));
}

/// NDCG@k with gain 2^rel - 1 and discount 1/log2(position + 1). The long
/// side ranks from the top score down; the short side inverts relevance
/// (4 - bin) and ranks from the bottom score up. An all-zero ideal DCG
/// yields 1.
inline double ndcg_at_k(std::span<const int> labels, std::span<const double> scores, std::size_t k, Direction dir,
                        std::span<const std::string> ids = {}) {
    const std::size_t n = labels.size();
    if (scores.size() != n) throw ShapeError("ndcg_at_k: labels and scores differ in length");
    if (k == 0 || k > n) throw DataError("ndcg_at_k: k must lie in [1, n]");
    auto rel = [&](std::size_t i) { return dir == Direction::Long ? labels[i] : (kNumBins - 1) - labels[i]; };
    const auto order = rank_order(scores, ids);
    double dcg = 0.0;
    for (std::size_t pos = 0; pos < k; ++pos) {
        const std::size_t i = dir == Direction::Long ? order[n - 1 - pos] : order[pos];
        dcg += (std::exp2(rel(i)) - 1.0) / std::log2(static_cast<double>(pos) + 2.0);
    }
    std::vector<int> ideal(n);
    for (std::size_t i = 0; i < n; ++i) ideal[i] = rel(i);
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t pos = 0; pos < k; ++pos) idcg += (std::exp2(ideal[pos]) - 1.0) / std::log2(static_cast<double>(pos) + 2.0);
    if (idcg == 0.0) return 1.0;
    return dcg / idcg;
}

/// Mean of the long and short NDCG@k for one rebalance.
inline double ndcg_long_short(std::span<const int> labels, std::span<const double> scores, std::size_t k,
                              std::span<const std::string> ids = {}) {
    return 0.5 * (ndcg_at_k(labels, scores, k, Direction::Long, ids) + ndcg_at_k(labels, scores, k, Direction::Short, ids));
}

/// +1 for the top_m highest scores, -1 for the top_m lowest, 0 elsewhere.
inline std::vector<int> scores_to_signal(std::span<const double> scores, std::span<const std::string> ids,
                                         std::size_t top_m) {
    const std::size_t n = scores.size();
    if (2 * top_m > n) {
        throw DataError("cannot take " + std::to_string(top_m) + " longs and shorts from " + std::to_string(n) +
                        " instruments");
    }
    const auto order = rank_order(scores, ids);
    std::vector<int> signal(n, 0);
    for (std::size_t i = 0; i < top_m; ++i) {
        signal[order[i]] = -1;
        signal[order[n - 1 - i]] = +1;
    }
    return signal;
}

}  // namespace fen
