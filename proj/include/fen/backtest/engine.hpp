#pragma once

// Volatility-targeted long/short backtest and performance metrics.
//
// Weekly data throughout: annualisation multiplies means by 52 and standard
// deviations by sqrt(52). The risk-free rate is taken as zero.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fen/core/error.hpp"
#include "fen/data/date.hpp"
#include "fen/ltr/ranking.hpp"
#include "fen/ltr/sample.hpp"

namespace fen {

inline constexpr double kAnnualisation = 52.0;

/// (1/n) * sum_i S_i (sigma_tgt / sigma_i) r_i, with n the universe size.
inline double csm_return(std::span<const int> signals, std::span<const double> vols,
                         std::span<const double> next_returns, double sigma_tgt = 0.15) {
    const std::size_t n = signals.size();
    if (vols.size() != n || next_returns.size() != n) throw ShapeError("csm_return: vectors are not aligned");
    // Legs are summed separately: long gains minus short losses.
    double long_leg = 0.0, short_leg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(vols[i] > 0.0)) throw DataError("csm_return: nonpositive volatility for instrument " + std::to_string(i));
        const double scaled = std::abs(signals[i]) * (sigma_tgt / vols[i]) * next_returns[i];
        if (signals[i] > 0) long_leg += scaled;
        if (signals[i] < 0) short_leg += scaled;
    }
    return (long_leg - short_leg) / static_cast<double>(n);
}

/// sigma_tgt * sum_i |S_i,t / sigma_i,t - S_i,t-1 / sigma_i,t-1|. Empty
/// previous vectors mean no prior positions.
inline double turnover(std::span<const int> signals, std::span<const int> prev_signals, std::span<const double> vols,
                       std::span<const double> prev_vols, double sigma_tgt = 0.15) {
    const std::size_t n = signals.size();
    if (vols.size() != n) throw ShapeError("turnover: vectors are not aligned");
    const bool has_prev = !prev_signals.empty();
    if (has_prev && (prev_signals.size() != n || prev_vols.size() != n)) throw ShapeError("turnover: previous vectors are not aligned");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double now = signals[i] == 0 ? 0.0 : signals[i] / vols[i];
        const double before = (!has_prev || prev_signals[i] == 0) ? 0.0 : prev_signals[i] / prev_vols[i];
        total += std::abs(now - before);
    }
    return sigma_tgt * total;
}

struct BacktestSeries {
    std::vector<Date> dates;  // rebalance dates t (returns realised over t -> t+1)
    std::vector<double> gross;
    std::vector<double> net;
    std::vector<double> turnover;
    std::vector<double> ndcg;  // mean of long and short NDCG@k per rebalance
    std::vector<std::vector<int>> positions;

    std::size_t size() const { return dates.size(); }
};

/// net_t = gross_t - (cost_bps / 1e4) * turnover_t
inline std::vector<double> apply_costs(std::span<const double> gross, std::span<const double> turnover_series,
                                       double cost_bps) {
    if (cost_bps < 0.0) throw ConfigError("transaction cost must be nonnegative");
    if (gross.size() != turnover_series.size()) throw ShapeError("apply_costs: series lengths differ");
    std::vector<double> net(gross.size());
    for (std::size_t i = 0; i < net.size(); ++i) net[i] = gross[i] - cost_bps * 1e-4 * turnover_series[i];
    return net;
}

inline BacktestSeries apply_costs(BacktestSeries series, double cost_bps) {
    series.net = apply_costs(series.gross, series.turnover, cost_bps);
    return series;
}

inline double sample_mean(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

inline double sample_std(std::span<const double> x) {
    if (x.size() < 2) return 0.0;
    // Rounding in the mean would otherwise give a constant series a tiny std.
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) return 0.0;
    const double m = sample_mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(x.size() - 1));
}

inline double annualised_vol(std::span<const double> weekly) { return sample_std(weekly) * std::sqrt(kAnnualisation); }

/// Scales the series so its full-sample annualised volatility equals sigma_tgt.
inline std::vector<double> rescale_to_target(std::span<const double> returns, double sigma_tgt = 0.15) {
    const double vol = annualised_vol(returns);
    if (!(vol > 0.0)) throw DataError("cannot rescale a series with zero volatility");
    std::vector<double> out(returns.begin(), returns.end());
    for (auto& r : out) r *= sigma_tgt / vol;
    return out;
}

struct MetricReport {
    double expected_return = 0.0;  // annualised
    double volatility = 0.0;       // annualised
    double raw_volatility = 0.0;   // annualised, before portfolio-level rescaling
    std::optional<double> sharpe;
    std::optional<double> sortino;
    std::optional<double> calmar;
    double downside_deviation = 0.0;
    double max_drawdown = 0.0;
    std::optional<double> profit_loss_ratio;
    double hit_rate = 0.0;
    double mean_ndcg = 0.0;
    double mean_turnover = 0.0;
};

inline constexpr std::size_t kMinMetricWeeks = 8;

/// Maximum peak-to-trough decline of the compounded equity curve (starting at 1).
inline double max_drawdown(std::span<const double> returns) {
    double equity = 1.0, peak = 1.0, mdd = 0.0;
    for (double r : returns) {
        equity *= 1.0 + r;
        peak = std::max(peak, equity);
        mdd = std::max(mdd, (peak - equity) / peak);
    }
    return mdd;
}

inline MetricReport compute_metrics(std::span<const double> returns) {
    if (returns.size() < kMinMetricWeeks) {
        throw DataError("metrics need at least " + std::to_string(kMinMetricWeeks) + " weekly returns, got " +
                        std::to_string(returns.size()));
    }
    MetricReport m;
    m.expected_return = kAnnualisation * sample_mean(returns);
    m.volatility = annualised_vol(returns);
    m.raw_volatility = m.volatility;
    if (m.volatility > 0.0) m.sharpe = m.expected_return / m.volatility;

    double down_sq = 0.0, pos_sum = 0.0, neg_sum = 0.0;
    std::size_t pos = 0, neg = 0;
    for (double r : returns) {
        if (r < 0.0) {
            down_sq += r * r;
            neg_sum += r;
            ++neg;
        } else if (r > 0.0) {
            pos_sum += r;
            ++pos;
        }
    }
    m.downside_deviation = std::sqrt(down_sq / static_cast<double>(returns.size())) * std::sqrt(kAnnualisation);
    if (m.downside_deviation > 0.0) m.sortino = m.expected_return / m.downside_deviation;
    m.max_drawdown = max_drawdown(returns);
    if (m.max_drawdown > 0.0) m.calmar = m.expected_return / m.max_drawdown;
    m.hit_rate = static_cast<double>(pos) / static_cast<double>(returns.size());
    if (neg > 0) m.profit_loss_ratio = (pos > 0 ? pos_sum / static_cast<double>(pos) : 0.0) / std::abs(neg_sum / static_cast<double>(neg));
    return m;
}

struct BacktestConfig {
    double vol_target = 0.15;
    std::size_t top_m = 2;
    std::size_t ndcg_k = 2;
    double cost_bps = 0.0;
};

/// Scores for one rebalance date, aligned with that date's sample rows.
struct WeekScores {
    Date date;
    std::vector<double> scores;
};

/// Score -> signal -> return -> turnover, one pass over the samples in date
/// order. Positions formed at t earn the t -> t+1 returns stored in the sample.
inline BacktestSeries run_backtest(std::span<const WeekScores> scores, std::span<const RankingSample> samples,
                                   const BacktestConfig& cfg = {}) {
    std::map<Date, const std::vector<double>*> by_date;
    for (const auto& s : scores) by_date[s.date] = &s.scores;
    std::string missing;
    for (const auto& s : samples) {
        if (!by_date.count(s.date)) missing += (missing.empty() ? "" : ", ") + s.date.str();
    }
    if (!missing.empty()) throw DataError("no scores for rebalance dates: " + missing);

    BacktestSeries out;
    for (std::size_t t = 0; t < samples.size(); ++t) {
        const auto& s = samples[t];
        if (t > 0 && !(samples[t - 1].date < s.date)) throw DataError("backtest samples must be in ascending date order");
        if (samples[t].ids != samples[0].ids) throw DataError("instrument universe changed on " + s.date.str());
        const auto& sc = *by_date[s.date];
        if (sc.size() != s.size()) throw ShapeError("score count differs from instrument count on " + s.date.str());
        auto sig = scores_to_signal(sc, s.ids, cfg.top_m);
        out.dates.push_back(s.date);
        out.gross.push_back(csm_return(sig, s.vols, s.next_returns, cfg.vol_target));
        out.turnover.push_back(t > 0 ? turnover(sig, out.positions[t - 1], s.vols, samples[t - 1].vols, cfg.vol_target)
                                     : turnover(sig, {}, s.vols, {}, cfg.vol_target));
        out.ndcg.push_back(ndcg_long_short(s.labels, sc, cfg.ndcg_k, s.ids));
        out.positions.push_back(std::move(sig));
    }
    out.net = apply_costs(out.gross, out.turnover, cfg.cost_bps);
    return out;
}

/// Metrics on the cost-adjusted series rescaled to the volatility target,
/// plus ranking and turnover averages.
inline MetricReport evaluate(const BacktestSeries& series, double vol_target = 0.15) {
    if (series.size() < kMinMetricWeeks) {
        throw DataError("metrics need at least " + std::to_string(kMinMetricWeeks) + " weeks");
    }
    const double vol = annualised_vol(series.net);
    MetricReport m = vol > 0.0 ? compute_metrics(rescale_to_target(series.net, vol_target)) : compute_metrics(series.net);
    m.raw_volatility = vol;
    m.mean_ndcg = sample_mean(series.ndcg);
    m.mean_turnover = sample_mean(series.turnover);
    return m;
}

}  // namespace fen
