#pragma once

// Exponentially weighted statistics, winsorisation, ex-ante volatility and
// the returns-based ranking features.
//
// Two decay parameterisations are in use:
//   span s      -> decay = 1 - 2 / (s + 1)   (volatility estimate)
//   halflife h  -> decay = 2^(-1 / h)        (winsorisation bounds)
// Weights on past observations are decay^age, normalised to sum to one; the
// variance carries the usual unbiased-weights correction
//   var = sum w (x - mean)^2 / (W - sum w^2 / W).

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fen/core/error.hpp"
#include "fen/core/tensor.hpp"
#include "fen/data/prices.hpp"
#include "fen/ltr/ranking.hpp"
#include "fen/ltr/sample.hpp"

namespace fen {

inline constexpr double kWeeksPerYear = 52.0;

inline double span_decay(double span) {
    if (!(span >= 1.0)) throw ConfigError("EWM span must be >= 1");
    return 1.0 - 2.0 / (span + 1.0);
}

inline double halflife_decay(double halflife) {
    if (!(halflife > 0.0)) throw ConfigError("EWM halflife must be positive");
    return std::exp2(-1.0 / halflife);
}

struct EwmStats {
    std::vector<double> mean;
    std::vector<double> std;  // NaN until two observations are available
};

/// Causal EWM mean and bias-corrected std; entry t uses x[0..t] inclusive.
inline EwmStats ewm_stats(std::span<const double> x, double decay) {
    EwmStats out;
    out.mean.resize(x.size());
    out.std.resize(x.size());
    double w = 0.0, w2 = 0.0, mean = 0.0, ss = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
        w = decay * w + 1.0;
        w2 = decay * decay * w2 + 1.0;
        ss *= decay;
        const double delta = x[t] - mean;
        mean += delta / w;
        ss += delta * (x[t] - mean);
        out.mean[t] = mean;
        const double denom = w - w2 / w;
        out.std[t] = t == 0 ? std::numeric_limits<double>::quiet_NaN() : std::sqrt(std::max(ss, 0.0) / denom);
    }
    return out;
}

/// Annualised ex-ante volatility: EWM std of weekly returns (span in weeks)
/// times sqrt(52), floored. The first entry is NaN (no variance yet).
inline std::vector<double> ewm_volatility(std::span<const double> returns, double span_weeks = 26.0,
                                          double floor = 0.005) {
    auto stats = ewm_stats(returns, span_decay(span_weeks));
    std::vector<double> vol(returns.size());
    for (std::size_t t = 0; t < vol.size(); ++t) {
        vol[t] = std::isnan(stats.std[t]) ? stats.std[t] : std::max(stats.std[t] * std::sqrt(kWeeksPerYear), floor);
    }
    return vol;
}

/// Clamp each point into mean +/- n_sigma * std using precomputed statistics.
inline std::vector<double> winsorise_with(std::span<const double> x, const EwmStats& stats, double n_sigma) {
    std::vector<double> out(x.begin(), x.end());
    for (std::size_t t = 0; t < out.size(); ++t) {
        if (std::isnan(stats.std[t])) continue;
        const double lo = stats.mean[t] - n_sigma * stats.std[t];
        const double hi = stats.mean[t] + n_sigma * stats.std[t];
        out[t] = std::clamp(out[t], lo, hi);
    }
    return out;
}

/// Caps and floors each point at its causal EWM mean +/- n_sigma EWM std
/// (halflife parameterisation, statistics include the point itself).
inline std::vector<double> winsorise(std::span<const double> x, double halflife_weeks = 26.0, double n_sigma = 3.0) {
    return winsorise_with(x, ewm_stats(x, halflife_decay(halflife_weeks)), n_sigma);
}

struct FeatureConfig {
    std::vector<int> horizons{1, 2, 3, 4};
    double vol_span = 26.0;
    double vol_floor = 0.005;
    bool winsorise = true;
    double winsor_halflife = 26.0;
    double winsor_sigma = 3.0;

    std::size_t width() const { return 2 * horizons.size(); }
    int max_horizon() const { return *std::max_element(horizons.begin(), horizons.end()); }

    void validate() const {
        if (horizons.empty()) throw ConfigError("feature horizons must not be empty");
        for (int h : horizons) {
            if (h < 1) throw ConfigError("feature horizons must be positive");
        }
    }

    std::vector<std::string> column_names() const {
        std::vector<std::string> names;
        for (int h : horizons) names.push_back("raw_" + std::to_string(h));
        for (int h : horizons) names.push_back("norm_" + std::to_string(h));
        return names;
    }
};

/// Per-week features for every symbol. `features[w]` is empty when week w
/// lacks history (fewer than max-horizon returns, or undefined volatility).
struct FeatureFrame {
    std::vector<Date> week_ends;
    std::vector<std::string> symbols;
    std::vector<Tensor> features;           // n x (2 * horizons)
    std::vector<std::vector<double>> vols;  // annualised, per week and symbol
    ReturnPanel returns;                    // raw simple returns
    ReturnPanel clean_returns;              // winsorised (or raw when disabled)
};

/// Raw cumulative return over each horizon tau, and the same divided by
/// weekly volatility scaled by sqrt(tau).
inline Tensor build_features(const ReturnPanel& returns, const std::vector<std::vector<double>>& weekly_vols_by_symbol,
                             std::size_t week, const FeatureConfig& cfg) {
    const std::size_t ns = returns.symbols.size();
    Tensor x = Tensor::matrix(ns, cfg.width());
    const std::size_t nh = cfg.horizons.size();
    for (std::size_t s = 0; s < ns; ++s) {
        const double weekly_vol = weekly_vols_by_symbol[s][week];
        for (std::size_t h = 0; h < nh; ++h) {
            const auto tau = static_cast<std::size_t>(cfg.horizons[h]);
            double growth = 1.0;
            for (std::size_t j = 0; j < tau; ++j) growth *= 1.0 + returns.at(week - j, s);
            const double raw = growth - 1.0;
            x(s, h) = raw;
            x(s, nh + h) = raw / (weekly_vol * std::sqrt(static_cast<double>(tau)));
        }
    }
    return x;
}

inline FeatureFrame compute_features(const WeeklyPanel& weekly, const FeatureConfig& cfg) {
    cfg.validate();
    FeatureFrame frame;
    frame.returns = weekly_returns(weekly);
    frame.week_ends = frame.returns.week_ends;
    frame.symbols = frame.returns.symbols;
    const std::size_t ns = frame.symbols.size(), nw = frame.returns.num_weeks();

    frame.clean_returns = frame.returns;
    std::vector<std::vector<double>> ann_vol(ns), weekly_vol(ns);
    for (std::size_t s = 0; s < ns; ++s) {
        const auto col = frame.returns.column(s);
        ann_vol[s] = ewm_volatility(col, cfg.vol_span, cfg.vol_floor);
        weekly_vol[s].resize(nw);
        for (std::size_t w = 0; w < nw; ++w) weekly_vol[s][w] = ann_vol[s][w] / std::sqrt(kWeeksPerYear);
        if (cfg.winsorise) {
            const auto clean = winsorise(col, cfg.winsor_halflife, cfg.winsor_sigma);
            for (std::size_t w = 0; w < nw; ++w) frame.clean_returns.returns[w * ns + s] = clean[w];
        }
    }

    const auto need = static_cast<std::size_t>(cfg.max_horizon());
    frame.features.resize(nw);
    frame.vols.resize(nw);
    for (std::size_t w = 0; w < nw; ++w) {
        frame.vols[w].resize(ns);
        bool vol_ok = true;
        for (std::size_t s = 0; s < ns; ++s) {
            frame.vols[w][s] = ann_vol[s][w];
            vol_ok = vol_ok && std::isfinite(ann_vol[s][w]);
        }
        if (w + 1 < need || !vol_ok) continue;
        frame.features[w] = build_features(frame.clean_returns, weekly_vol, w, cfg);
    }
    return frame;
}

/// Ranking samples for every week that has features and a following week.
inline std::vector<RankingSample> build_samples(const FeatureFrame& frame) {
    std::vector<RankingSample> out;
    const std::size_t ns = frame.symbols.size();
    for (std::size_t w = 0; w + 1 < frame.week_ends.size(); ++w) {
        if (frame.features[w].empty()) continue;
        RankingSample s;
        s.date = frame.week_ends[w];
        s.next_date = frame.week_ends[w + 1];
        s.ids = frame.symbols;
        s.features = frame.features[w];
        s.vols = frame.vols[w];
        s.next_returns.resize(ns);
        s.targets.resize(ns);
        for (std::size_t i = 0; i < ns; ++i) {
            s.next_returns[i] = frame.returns.at(w + 1, i);
            s.targets[i] = frame.clean_returns.at(w + 1, i) / (s.vols[i] / std::sqrt(kWeeksPerYear));
        }
        s.labels = assign_quintiles(s.next_returns, s.ids);
        out.push_back(std::move(s));
    }
    return out;
}

inline std::vector<RankingSample> prepare_samples(const PricePanel& prices, const FeatureConfig& cfg,
                                                  const WeeklyOptions& weekly = {}) {
    return build_samples(compute_features(to_weekly(prices, weekly), cfg));
}

}  // namespace fen
