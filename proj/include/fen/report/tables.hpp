#pragma once

// Report CSVs. Column names and order are fixed; a model without runs
// leaves its cells empty. Cross-run aggregates are mean and sample std
// (std left empty for a single run).
//
//   metrics_table.csv      metric,<model>_mean,<model>_std,...
//   ndcg_table.csv         metric,<model>_mean,<model>_std,...
//   turnover_table.csv     metric,<model>_mean,<model>_std,...
//   cost_sharpe_table.csv  cost_bps,<model>_mean,<model>_std,...
//   heatmap_<group>.csv    instrument,<instrument>...
//   column_avg_<group>.csv rank,mean_weight,position
//   segmented_returns.csv  partition,model_a,model_b,count,ndcg_a_mean,ndcg_a_std,ndcg_b_mean,ndcg_b_std,
//                          return_a_mean,return_a_std,return_b_mean,return_b_std

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fen/backtest/engine.hpp"
#include "fen/data/csv.hpp"
#include "fen/report/heatmaps.hpp"
#include "fen/report/segmented.hpp"

namespace fen {

inline const std::vector<std::string>& model_order() {
    static const std::vector<std::string> order{"1WR", "MLP", "LN", "SAR", "SAR+ps", "FEN"};
    return order;
}

inline const std::vector<double>& cost_grid_bps() {
    static const std::vector<double> grid{0, 5, 10, 15, 20, 25, 30};
    return grid;
}

/// Backtest series of every run, keyed by model name.
using RunSeries = std::map<std::string, std::vector<BacktestSeries>>;

namespace detail {

inline std::vector<std::string> model_columns(const std::string& first) {
    std::vector<std::string> h{first};
    for (const auto& m : model_order()) {
        h.push_back(m + "_mean");
        h.push_back(m + "_std");
    }
    return h;
}

inline void append_stats(std::vector<std::string>& row, const std::vector<double>& values) {
    if (values.empty()) {
        row.insert(row.end(), {"", ""});
        return;
    }
    row.push_back(csv::fmt(sample_mean(values)));
    row.push_back(values.size() > 1 ? csv::fmt(sample_std(values)) : "");
}

using Extract = std::function<std::optional<double>(const MetricReport&)>;

inline std::string model_table(const std::string& first, const std::map<std::string, std::vector<MetricReport>>& reports,
                               const std::vector<std::pair<std::string, Extract>>& rows) {
    std::string out = csv::join(model_columns(first)) + "\n";
    for (const auto& [name, get] : rows) {
        std::vector<std::string> row{name};
        for (const auto& m : model_order()) {
            std::vector<double> vals;
            if (auto it = reports.find(m); it != reports.end()) {
                for (const auto& r : it->second) {
                    if (auto v = get(r)) vals.push_back(*v);
                }
            }
            append_stats(row, vals);
        }
        out += csv::join(row) + "\n";
    }
    return out;
}

}  // namespace detail

inline std::map<std::string, std::vector<MetricReport>> evaluate_runs(const RunSeries& runs, double vol_target,
                                                                      double cost_bps = 0.0) {
    std::map<std::string, std::vector<MetricReport>> out;
    for (const auto& [model, series] : runs) {
        for (const auto& s : series) out[model].push_back(evaluate(apply_costs(s, cost_bps), vol_target));
    }
    return out;
}

inline std::string metrics_table_csv(const RunSeries& runs, double vol_target) {
    using R = const MetricReport&;
    return detail::model_table("metric", evaluate_runs(runs, vol_target),
                               {
                                   {"expected_return", [](R r) { return std::optional(r.expected_return); }},
                                   {"volatility", [](R r) { return std::optional(r.volatility); }},
                                   {"raw_volatility", [](R r) { return std::optional(r.raw_volatility); }},
                                   {"sharpe", [](R r) { return r.sharpe; }},
                                   {"sortino", [](R r) { return r.sortino; }},
                                   {"calmar", [](R r) { return r.calmar; }},
                                   {"downside_deviation", [](R r) { return std::optional(r.downside_deviation); }},
                                   {"max_drawdown", [](R r) { return std::optional(r.max_drawdown); }},
                                   {"profit_loss_ratio", [](R r) { return r.profit_loss_ratio; }},
                                   {"hit_rate", [](R r) { return std::optional(r.hit_rate); }},
                               });
}

inline std::string ndcg_table_csv(const RunSeries& runs, double vol_target, std::size_t k) {
    return detail::model_table("metric", evaluate_runs(runs, vol_target),
                               {{"ndcg_at_" + std::to_string(k),
                                 [](const MetricReport& r) { return std::optional(r.mean_ndcg); }}});
}

inline std::string turnover_table_csv(const RunSeries& runs, double vol_target) {
    return detail::model_table("metric", evaluate_runs(runs, vol_target),
                               {{"turnover", [](const MetricReport& r) { return std::optional(r.mean_turnover); }}});
}

inline std::string cost_sharpe_table_csv(const RunSeries& runs, double vol_target) {
    std::string out = csv::join(detail::model_columns("cost_bps")) + "\n";
    for (double bps : cost_grid_bps()) {
        const auto reports = evaluate_runs(runs, vol_target, bps);
        std::vector<std::string> row{csv::fmt(bps)};
        for (const auto& m : model_order()) {
            std::vector<double> vals;
            if (auto it = reports.find(m); it != reports.end()) {
                for (const auto& r : it->second) {
                    if (r.sharpe) vals.push_back(*r.sharpe);
                }
            }
            detail::append_stats(row, vals);
        }
        out += csv::join(row) + "\n";
    }
    return out;
}

inline std::string heatmap_csv(const Tensor& mean, const std::vector<std::string>& universe) {
    std::vector<std::string> h{"instrument"};
    h.insert(h.end(), universe.begin(), universe.end());
    std::string out = csv::join(h) + "\n";
    for (std::size_t i = 0; i < universe.size(); ++i) {
        std::vector<std::string> row{universe[i]};
        for (std::size_t j = 0; j < universe.size(); ++j) row.push_back(csv::fmt(mean(i, j)));
        out += csv::join(row) + "\n";
    }
    return out;
}

inline std::string column_avg_csv(const std::vector<double>& means, std::size_t top_m) {
    std::string out = "rank,mean_weight,position\n";
    for (std::size_t r = 0; r < means.size(); ++r) {
        out += csv::join({std::to_string(r + 1), csv::fmt(means[r]), rank_position(r, means.size(), top_m)}) + "\n";
    }
    return out;
}

inline std::string segmented_returns_csv(const std::vector<Segment>& segments, const std::string& model_a,
                                         const std::string& model_b) {
    std::string out =
        "partition,model_a,model_b,count,ndcg_a_mean,ndcg_a_std,ndcg_b_mean,ndcg_b_std,return_a_mean,return_a_std,"
        "return_b_mean,return_b_std\n";
    for (const auto& s : segments) {
        out += csv::join({s.partition, model_a, model_b, std::to_string(s.count), csv::fmt(s.ndcg_a.mean),
                          csv::fmt(s.ndcg_a.std), csv::fmt(s.ndcg_b.mean), csv::fmt(s.ndcg_b.std),
                          csv::fmt(s.return_a.mean), csv::fmt(s.return_a.std), csv::fmt(s.return_b.mean),
                          csv::fmt(s.return_b.std)}) +
               "\n";
    }
    return out;
}

}  // namespace fen
