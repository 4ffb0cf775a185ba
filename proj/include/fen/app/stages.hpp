#pragma once

// CLI stages. Each reads the previous stage's manifest from the output tree
// and writes its own; all paths inside manifests are relative to the output
// root, and nothing time-dependent is written, so a rerun reproduces every
// byte.
//
//   data/       samples, regimes, window plans          prepare-data
//   source/     candidate checkpoints + Sharpe          pretrain-source
//   target/     stage-two checkpoints                   train-target
//   finetune/   fine-tuned transfer checkpoints         finetune
//   backtest/   weekly series per run, FEN attention    backtest
//   report/     table, heatmap and segment CSVs         report, heatmaps

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "fen/app/config.hpp"
#include "fen/app/protocol.hpp"
#include "fen/core/checkpoint.hpp"
#include "fen/data/csv.hpp"
#include "fen/data/features.hpp"
#include "fen/data/regimes.hpp"
#include "fen/data/samples_csv.hpp"
#include "fen/report/tables.hpp"

namespace fen {

namespace fs = std::filesystem;

/// `root` holds data/ and source/; `work` holds the downstream stages (the
/// same directory except for the negative-transfer branch).
struct OutputTree {
    fs::path root;
    fs::path work;

    explicit OutputTree(const fs::path& r, const fs::path& w = {}) : root(r), work(w.empty() ? r : w) {}

    fs::path data() const { return root / "data"; }
    fs::path source() const { return root / "source"; }
    fs::path target() const { return work / "target"; }
    fs::path finetuned() const { return work / "finetune"; }
    fs::path backtest() const { return work / "backtest"; }
    fs::path report() const { return work / "report"; }
};

namespace detail {

inline void write_text(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    csv::write_file(p.string(), text);
}

inline void write_json(const fs::path& p, const Json& j) { write_text(p, j.dump(2) + "\n"); }

inline Json read_manifest(const fs::path& p, const std::string& prerequisite) {
    if (!fs::exists(p)) {
        throw ConfigError("missing " + p.string() + "; run `" + prerequisite + "` first");
    }
    std::ifstream in(p);
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw DataError("corrupt manifest " + p.string() + ": " + e.what());
    }
}

inline std::string rel(const OutputTree& t, const fs::path& p) { return fs::relative(p, t.root).generic_string(); }

inline Json to_json(const HyperParams& h) {
    return {{"dropout", h.dropout}, {"hidden_width", h.hidden_width}, {"batch_size", h.batch_size},
            {"learning_rate", h.learning_rate}, {"d_model", h.d_model}, {"d_ff", h.d_ff},
            {"layers", h.layers}, {"heads", h.heads}};
}

inline HyperParams hyper_from_json(const Json& j) { return parse_hyper(j, "manifest"); }

inline Json to_json(const TrainHistory& h) {
    Json epochs = Json::array();
    for (const auto& e : h.epochs) epochs.push_back({e.epoch, e.train_loss, e.validation_loss});
    return {{"epochs", epochs},
            {"best_epoch", h.best_epoch},
            {"best_validation_loss", h.best_epoch ? Json(h.best_validation_loss) : Json(nullptr)},
            {"optimizer_steps", h.optimizer_steps},
            {"stopped_early", h.stopped_early}};
}

inline TrainHistory history_from_json(const Json& j) {
    TrainHistory h;
    for (const auto& e : j.at("epochs")) h.epochs.push_back({e[0].get<std::size_t>(), e[1].get<double>(), e[2].get<double>()});
    h.best_epoch = j.at("best_epoch").get<std::size_t>();
    if (!j.at("best_validation_loss").is_null()) h.best_validation_loss = j.at("best_validation_loss").get<double>();
    h.optimizer_steps = j.at("optimizer_steps").get<std::size_t>();
    h.stopped_early = j.at("stopped_early").get<bool>();
    return h;
}

inline Json to_json(const ChosenParams& c) {
    Json j = {{"params", to_json(c.params)}, {"searched", c.search.has_value()}};
    if (c.search) {
        Json trials = Json::array();
        for (const auto& t : c.search->trials) trials.push_back({{"params", to_json(t.params)}, {"loss", t.loss}});
        j["best_iteration"] = c.search->best_iteration;
        j["trials"] = trials;
    }
    return j;
}

inline Json window_json(const std::vector<RankingSample>& samples, const WindowPlan& plan) {
    auto range = [&](const std::vector<std::size_t>& idx) -> Json {
        if (idx.empty()) return {{"count", 0}};
        return {{"first", samples[idx.front()].date.str()}, {"last", samples[idx.back()].date.str()},
                {"last_label", samples[idx.back()].next_date.str()}, {"count", idx.size()}};
    };
    Json out = Json::array();
    for (const auto& f : plan.folds) {
        out.push_back({{"test_year", f.test_year}, {"train", range(f.train)}, {"validation", range(f.validation)},
                       {"test", range(f.test)}});
    }
    return out;
}

struct LoadedData {
    std::vector<RankingSample> target, source;
    std::vector<std::string> target_names, source_names;
    std::size_t source_top_m = 1;
};

inline LoadedData load_data(const OutputTree& t) {
    const Json m = read_manifest(t.data() / "manifest.json", "prepare-data");
    LoadedData d;
    d.target = samples_from_csv(csv::read_lines((t.root / m.at("target").at("samples").get<std::string>()).string()),
                                &d.target_names, "target samples");
    d.source = samples_from_csv(csv::read_lines((t.root / m.at("source").at("samples").get<std::string>()).string()),
                                &d.source_names, "source samples");
    d.source_top_m = m.at("source").at("top_m").get<std::size_t>();
    return d;
}

inline fs::path checkpoint_path(const fs::path& dir, const std::string& model, int year, std::size_t run) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "r%02zu.ckpt", run);
    return dir / model_slug(model) / ("y" + std::to_string(year)) / buf;
}

inline SourcePool load_source_pool(const OutputTree& t) {
    const Json m = read_manifest(t.source() / "manifest.json", "pretrain-source");
    SourcePool pool;
    for (const auto& c : m.at("candidates")) {
        SourceRun r;
        r.year = c.at("year").get<int>();
        r.candidate = c.at("candidate").get<std::size_t>();
        r.seed = c.at("seed").get<std::uint64_t>();
        r.width = c.at("width").get<std::size_t>();
        r.params = hyper_from_json(c.at("params"));
        r.sharpe = c.at("sharpe").get<double>();
        r.history = history_from_json(c.at("history"));
        r.weights = load_checkpoint((t.root / c.at("checkpoint").get<std::string>()).string());
        pool[r.year].push_back(std::move(r));
    }
    return pool;
}

inline Json target_run_json(const OutputTree& t, const TargetRun& r, const fs::path& ckpt) {
    Json j = {{"model", r.model}, {"year", r.year}, {"run", r.run}, {"seed", r.seed},
              {"params", to_json(r.params)}, {"checkpoint", rel(t, ckpt)}, {"history", to_json(r.history)}};
    j["source_candidate"] = r.source_candidate ? Json(*r.source_candidate) : Json(nullptr);
    if (r.finetune_history) j["finetune_history"] = to_json(*r.finetune_history);
    return j;
}

inline std::vector<TargetRun> load_target_runs(const OutputTree& t, const fs::path& manifest, const std::string& prerequisite) {
    const Json m = read_manifest(manifest, prerequisite);
    std::vector<TargetRun> out;
    for (const auto& j : m.at("runs")) {
        TargetRun r;
        r.model = j.at("model").get<std::string>();
        r.year = j.at("year").get<int>();
        r.run = j.at("run").get<std::size_t>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.params = hyper_from_json(j.at("params"));
        if (!j.at("source_candidate").is_null()) r.source_candidate = j.at("source_candidate").get<std::size_t>();
        r.history = history_from_json(j.at("history"));
        if (j.contains("finetune_history")) r.finetune_history = history_from_json(j.at("finetune_history"));
        r.weights = load_checkpoint((t.root / j.at("checkpoint").get<std::string>()).string());
        out.push_back(std::move(r));
    }
    return out;
}

inline std::string series_csv(const BacktestSeries& s) {
    std::string out = "date,gross,net,turnover,ndcg\n";
    for (std::size_t i = 0; i < s.size(); ++i) {
        out += csv::join({s.dates[i].str(), csv::fmt(s.gross[i]), csv::fmt(s.net[i]), csv::fmt(s.turnover[i]),
                          csv::fmt(s.ndcg[i])}) +
               "\n";
    }
    return out;
}

inline BacktestSeries series_from_csv(const std::string& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty() || lines[0] != "date,gross,net,turnover,ndcg") throw DataError(path + ": unexpected header");
    BacktestSeries s;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = csv::split(lines[i]);
        const std::string where = path + " line " + std::to_string(i + 1);
        if (f.size() != 5) throw DataError(where + ": wrong field count");
        s.dates.push_back(Date::parse(f[0]));
        s.gross.push_back(csv::parse_double(f[1], where));
        s.net.push_back(csv::parse_double(f[2], where));
        s.turnover.push_back(csv::parse_double(f[3], where));
        s.ndcg.push_back(csv::parse_double(f[4], where));
    }
    return s;
}

inline void log(const std::string& msg) { std::clog << "[fen] " << msg << "\n"; }

}  // namespace detail

// ---------------------------------------------------------------- prepare-data

inline void stage_prepare_data(const RunConfig& cfg) {
    using namespace detail;
    validate_run_config(cfg);
    const OutputTree t(cfg.output_dir);
    auto build = [&](const DatasetConfig& d, const std::string& name) {
        const auto prices = load_prices(d.prices, d.universe);
        auto samples = prepare_samples(prices, d.features, d.weekly);
        if (samples.empty()) throw DataError(name + " data yields no ranking samples");
        const fs::path file = t.data() / (name + "_samples.csv");
        write_text(file, samples_to_csv(samples, d.features.column_names()));
        log(name + ": " + std::to_string(samples.size()) + " rebalances x " + std::to_string(samples.front().size()) +
            " instruments");
        return std::make_pair(std::move(samples), file);
    };
    auto [target, tfile] = build(cfg.target, "target");
    auto [source, sfile] = build(cfg.source, "source");
    if (2 * cfg.top_m > target.front().size()) {
        throw ConfigError("top_m " + std::to_string(cfg.top_m) + " is too large for " +
                          std::to_string(target.front().size()) + " target instruments");
    }
    const auto tplan = plan_windows(std::span<const RankingSample>(target), cfg.first_test_year, cfg.last_test_year);
    const auto splan =
        plan_windows(std::span<const RankingSample>(source), cfg.first_test_year - 1, cfg.last_test_year - 1);

    Json m;
    m["target"] = {{"samples", rel(t, tfile)}, {"feature_names", cfg.target.features.column_names()},
                   {"instruments", target.front().ids}, {"rebalances", target.size()}, {"top_m", cfg.top_m}};
    m["source"] = {{"samples", rel(t, sfile)}, {"feature_names", cfg.source.features.column_names()},
                   {"instruments", source.front().ids}, {"rebalances", source.size()},
                   {"top_m", positions_per_side(cfg.source, source.front().size())}};
    m["windows"] = {{"target", window_json(target, tplan)}, {"source", window_json(source, splan)}};
    m["regimes"] = nullptr;
    if (cfg.index_prices) {
        const auto index = load_index_series(*cfg.index_prices);
        std::vector<Date> dates;
        for (const auto& s : target) dates.push_back(s.date);
        const auto labels = label_regimes(index, dates, cfg.regimes);
        std::string out = "date,regime\n";
        for (std::size_t i = 0; i < dates.size(); ++i) out += dates[i].str() + "," + (labels[i] ? regime_name(*labels[i]) : "") + "\n";
        write_text(t.data() / "regimes.csv", out);
        m["regimes"] = "data/regimes.csv";
    }
    write_json(t.data() / "manifest.json", m);
}

// ---------------------------------------------------------------- pretrain-source

inline void stage_pretrain_source(const RunConfig& cfg) {
    using namespace detail;
    const OutputTree t(cfg.output_dir);
    const auto d = load_data(t);
    std::map<int, ChosenParams> chosen;
    log("pre-training " + std::to_string(cfg.candidates) + " source candidates per year");
    const auto pool = run_source_stage(cfg, d.source, d.source_top_m, &chosen);
    Json m;
    m["candidates"] = Json::array();
    for (const auto& [year, runs] : pool) {
        for (const auto& r : runs) {
            char name[32];
            std::snprintf(name, sizeof name, "c%02zu.ckpt", r.candidate);
            const auto ckpt = t.source() / ("y" + std::to_string(year)) / name;
            fs::create_directories(ckpt.parent_path());
            save_checkpoint(ckpt.string(), r.weights);
            m["candidates"].push_back({{"year", r.year}, {"candidate", r.candidate}, {"seed", r.seed},
                                       {"width", r.width}, {"params", to_json(r.params)}, {"sharpe", r.sharpe},
                                       {"checkpoint", rel(t, ckpt)}, {"history", to_json(r.history)}});
        }
    }
    m["hyperparameters"] = Json::object();
    for (const auto& [year, c] : chosen) m["hyperparameters"][std::to_string(year)] = to_json(c);
    write_json(t.source() / "manifest.json", m);
}

// ---------------------------------------------------------------- train-target

inline void stage_train_target(const RunConfig& cfg, const OutputTree& t) {
    using namespace detail;
    const auto d = load_data(t);
    const bool transfer = cfg.has_model("FEN") || cfg.has_model("SAR+ps");
    std::optional<SourcePool> pool;
    if (transfer) {
        if (!fs::exists(t.source() / "manifest.json")) {
            throw ConfigError("FEN and SAR+ps need source checkpoints (" + (t.source() / "manifest.json").string() +
                              " is missing); run `pretrain-source` first");
        }
        pool = load_source_pool(t);
    }
    std::map<std::string, ChosenParams> chosen;
    std::vector<SourceSelection> selections;
    log("training target models");
    const auto runs = run_target_stage(cfg, d.target, pool ? &*pool : nullptr, &chosen, &selections);
    Json m;
    m["mode"] = selection_mode_name(cfg.mode);
    m["selections"] = Json::array();
    for (const auto& s : selections) {
        Json cands = Json::array();
        for (const auto& c : s.candidates) cands.push_back({{"id", c.run_id}, {"seed", c.seed}, {"sharpe", *c.sharpe}});
        m["selections"].push_back({{"year", s.year}, {"candidates", cands}, {"chosen", s.chosen}});
    }
    m["hyperparameters"] = Json::object();
    for (const auto& [k, c] : chosen) m["hyperparameters"][k] = to_json(c);
    m["runs"] = Json::array();
    for (const auto& r : runs) {
        const auto ckpt = checkpoint_path(t.target(), r.model, r.year, r.run);
        fs::create_directories(ckpt.parent_path());
        save_checkpoint(ckpt.string(), r.weights);
        m["runs"].push_back(target_run_json(t, r, ckpt));
    }
    write_json(t.target() / "manifest.json", m);
}

// ---------------------------------------------------------------- finetune

inline void stage_finetune(const RunConfig& cfg, const OutputTree& t) {
    using namespace detail;
    const auto d = load_data(t);
    auto runs = load_target_runs(t, t.target() / "manifest.json", "train-target");
    std::vector<TargetRun> transfer;
    for (auto& r : runs) {
        if (is_transfer_model(r.model)) transfer.push_back(std::move(r));
    }
    const auto pool = transfer.empty() ? SourcePool{} : load_source_pool(t);
    log("fine-tuning " + std::to_string(transfer.size()) + " transfer runs");
    run_finetune_stage(cfg, d.target, pool, transfer);
    Json m;
    m["learning_rate"] = kFinetuneLearningRate;
    m["runs"] = Json::array();
    for (const auto& r : transfer) {
        const auto ckpt = checkpoint_path(t.finetuned(), r.model, r.year, r.run);
        fs::create_directories(ckpt.parent_path());
        save_checkpoint(ckpt.string(), r.weights);
        m["runs"].push_back(target_run_json(t, r, ckpt));
    }
    write_json(t.finetuned() / "manifest.json", m);
}

// ---------------------------------------------------------------- backtest

inline std::string attention_csv(const std::map<std::size_t, std::vector<Heatmap>>& maps) {
    std::string out;
    for (const auto& [run, list] : maps) {
        for (const auto& h : list) {
            if (out.empty()) {
                std::vector<std::string> head{"run", "date", "instrument", "score"};
                head.insert(head.end(), h.ids.begin(), h.ids.end());
                out = csv::join(head) + "\n";
            }
            for (std::size_t i = 0; i < h.ids.size(); ++i) {
                std::vector<std::string> row{std::to_string(run), h.date.str(), h.ids[i], csv::fmt(h.scores[i])};
                for (std::size_t j = 0; j < h.ids.size(); ++j) row.push_back(csv::fmt(h.weights(i, j)));
                out += csv::join(row) + "\n";
            }
        }
    }
    return out;
}

inline void stage_backtest(const RunConfig& cfg, const OutputTree& t) {
    using namespace detail;
    const auto d = load_data(t);
    auto runs = load_target_runs(t, t.target() / "manifest.json", "train-target");
    const bool transfer = std::any_of(runs.begin(), runs.end(), [](const TargetRun& r) { return is_transfer_model(r.model); });
    std::optional<SourcePool> pool;
    if (transfer) {
        auto tuned = load_target_runs(t, t.finetuned() / "manifest.json", "finetune");
        std::erase_if(runs, [](const TargetRun& r) { return is_transfer_model(r.model); });
        for (auto& r : tuned) runs.push_back(std::move(r));
        pool = load_source_pool(t);
    }
    log("backtesting");
    const auto out = run_backtest_stage(cfg, d.target, d.target_names, runs, pool ? &*pool : nullptr);
    Json m;
    m["cost_bps"] = cfg.cost_bps;
    m["series"] = Json::object();
    for (const auto& [model, list] : out.series) {
        Json files = Json::array();
        for (std::size_t j = 0; j < list.size(); ++j) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "r%02zu.csv", j);
            const auto p = t.backtest() / model_slug(model) / buf;
            write_text(p, series_csv(list[j]));
            files.push_back(rel(t, p));
        }
        m["series"][model] = files;
    }
    m["attention"] = nullptr;
    if (!out.fen_heatmaps.empty()) {
        write_text(t.backtest() / "fen_attention.csv", attention_csv(out.fen_heatmaps));
        m["attention"] = rel(t, t.backtest() / "fen_attention.csv");
    }
    if (!out.fen_source_heatmaps.empty()) {
        write_text(t.backtest() / "fen_source_attention.csv", attention_csv(out.fen_source_heatmaps));
        m["source_attention"] = rel(t, t.backtest() / "fen_source_attention.csv");
    }
    write_json(t.backtest() / "manifest.json", m);
}

// ---------------------------------------------------------------- report

inline RunSeries load_series(const OutputTree& t) {
    const Json m = detail::read_manifest(t.backtest() / "manifest.json", "backtest");
    RunSeries out;
    for (auto it = m.at("series").begin(); it != m.at("series").end(); ++it) {
        for (const auto& f : it.value()) out[it.key()].push_back(detail::series_from_csv((t.root / f.get<std::string>()).string()));
    }
    return out;
}

inline void stage_report(const RunConfig& cfg, const OutputTree& t) {
    using namespace detail;
    auto runs = load_series(t);
    // Stored net series carry the backtest's cost; re-derive from gross here.
    RunSeries at_cost;
    for (auto& [model, list] : runs) {
        for (auto& s : list) at_cost[model].push_back(apply_costs(s, cfg.cost_bps));
    }
    write_text(t.report() / "metrics_table.csv", metrics_table_csv(at_cost, cfg.vol_target));
    write_text(t.report() / "ndcg_table.csv", ndcg_table_csv(at_cost, cfg.vol_target, cfg.ndcg_k));
    write_text(t.report() / "turnover_table.csv", turnover_table_csv(at_cost, cfg.vol_target));
    write_text(t.report() / "cost_sharpe_table.csv", cost_sharpe_table_csv(runs, cfg.vol_target));
    if (at_cost.count("MLP") && at_cost.count("FEN")) {
        const auto segs = segmented_returns(at_cost.at("MLP"), at_cost.at("FEN"));
        write_text(t.report() / "segmented_returns.csv", segmented_returns_csv(segs, "MLP", "FEN"));
    } else {
        write_text(t.report() / "segmented_returns.csv", segmented_returns_csv({}, "MLP", "FEN"));
        log("warning: segmented returns need both MLP and FEN runs; wrote an empty table");
    }
}

// ---------------------------------------------------------------- heatmaps

inline HeatmapBundle load_heatmaps(const OutputTree& t) {
    const Json m = detail::read_manifest(t.backtest() / "manifest.json", "backtest");
    if (m.at("attention").is_null()) throw ConfigError("no FEN attention was exported; include FEN in `models` and rerun `backtest`");
    const auto lines = csv::read_lines((t.root / m.at("attention").get<std::string>()).string());
    if (lines.empty()) throw DataError("empty attention export");
    const auto head = csv::split(lines[0]);
    const std::vector<std::string> ids(head.begin() + 4, head.end());
    const std::size_t n = ids.size();
    std::map<Date, Regime> regimes;
    const Json dm = detail::read_manifest(t.data() / "manifest.json", "prepare-data");
    if (!dm.at("regimes").is_null()) {
        const auto rl = csv::read_lines((t.root / dm.at("regimes").get<std::string>()).string());
        for (std::size_t i = 1; i < rl.size(); ++i) {
            const auto f = csv::split(rl[i]);
            if (f.size() == 2 && !f[1].empty()) regimes[Date::parse(f[0])] = f[1] == "risk_off" ? Regime::RiskOff : Regime::Normal;
        }
    }
    HeatmapBundle b;
    for (std::size_t li = 1; li < lines.size(); li += n) {
        if (li + n > lines.size()) throw DataError("truncated attention export");
        Heatmap h;
        h.ids = ids;
        h.weights = Tensor::matrix(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto f = csv::split(lines[li + i]);
            if (f.size() != 4 + n) throw DataError("attention export line " + std::to_string(li + i + 1) + ": wrong field count");
            h.date = Date::parse(f[1]);
            h.scores.push_back(csv::parse_double(f[3], "attention export"));
            for (std::size_t j = 0; j < n; ++j) h.weights(i, j) = csv::parse_double(f[4 + j], "attention export");
        }
        if (auto it = regimes.find(h.date); it != regimes.end()) h.regime = it->second;
        b.entries.push_back(std::move(h));
    }
    return b;
}

inline void stage_heatmaps(const RunConfig& cfg, const OutputTree& t) {
    using namespace detail;
    const auto bundle = load_heatmaps(t);
    if (bundle.entries.empty()) throw DataError("attention export has no heatmaps");
    const auto universe = bundle.entries.front().ids;
    HeatmapAggregate agg;
    ColumnAverages cols;
    if (cfg.heatmap_group_by == "regime") {
        agg = aggregate_heatmaps(bundle, universe);
        cols = column_averages(bundle);
    } else {
        std::vector<DateRange> ranges;
        for (int y = cfg.first_test_year; y <= cfg.last_test_year; ++y) {
            ranges.push_back({std::to_string(y), Date::from_ymd(y, 1, 1), Date::from_ymd(y, 12, 31)});
        }
        agg = aggregate_heatmaps(bundle, universe, ranges);
        cols = column_averages(bundle, ranges);
    }
    for (const auto& w : agg.warnings) log("warning: " + w);
    for (const auto& [g, mean] : agg.groups) write_text(t.report() / ("heatmap_" + g + ".csv"), heatmap_csv(mean, universe));
    for (const auto& [g, v] : cols.groups) write_text(t.report() / ("column_avg_" + g + ".csv"), column_avg_csv(v, cfg.top_m));
}

// ---------------------------------------------------------------- composites

inline void stage_negative_transfer(RunConfig cfg) {
    cfg.mode = SelectionMode::Worst;
    std::vector<std::string> models;
    for (const auto& m : cfg.models) {
        if (is_transfer_model(m)) models.push_back(m);
    }
    if (models.empty()) throw ConfigError("negative-transfer needs FEN or SAR+ps in `models`");
    cfg.models = models;
    const OutputTree t(cfg.output_dir, cfg.output_dir / "negative_transfer");
    stage_train_target(cfg, t);
    stage_finetune(cfg, t);
    stage_backtest(cfg, t);
    stage_report(cfg, t);
}

inline void run_all(const RunConfig& cfg) {
    const OutputTree t(cfg.output_dir);
    stage_prepare_data(cfg);
    if (cfg.has_model("FEN") || cfg.has_model("SAR+ps")) stage_pretrain_source(cfg);
    stage_train_target(cfg, t);
    stage_finetune(cfg, t);
    stage_backtest(cfg, t);
    stage_report(cfg, t);
    if (cfg.has_model("FEN")) stage_heatmaps(cfg, t);
}

}  // namespace fen
