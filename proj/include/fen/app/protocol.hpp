#pragma once

// The three-stage transfer protocol and its benchmarks, in memory.
//
//   source stage   per source test year y = t-1: `candidates` SAR runs trained
//                  through y-1 and backtested over y
//   target stage   per target test year t: select `take` sources by their
//                  year t-1 Sharpe, train runs/take target models on each with
//                  the source frozen; benchmarks train from scratch
//   fine-tune      FEN and SAR+ps retrain unfrozen at the smallest learning rate
//   backtest       one series per model run spanning every test year

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "fen/app/config.hpp"
#include "fen/backtest/engine.hpp"
#include "fen/models/rankers.hpp"
#include "fen/report/heatmaps.hpp"
#include "fen/train/parallel.hpp"
#include "fen/train/search.hpp"
#include "fen/train/selection.hpp"
#include "fen/train/trainer.hpp"
#include "fen/train/windows.hpp"

namespace fen {

/// splitmix64 over an FNV-1a digest of the tag and indices.
inline std::uint64_t derive_seed(std::uint64_t master, const std::string& tag, std::initializer_list<std::int64_t> idx) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](unsigned char b) {
        h ^= b;
        h *= 1099511628211ULL;
    };
    for (char c : tag) mix(static_cast<unsigned char>(c));
    for (std::int64_t v : idx) {
        for (int b = 0; b < 8; ++b) mix(static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * b)) & 0xff));
    }
    std::uint64_t z = master + h + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::string model_slug(const std::string& m) {
    std::string out;
    for (char c : m) out += c == '+' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline bool is_transfer_model(const std::string& m) { return m == "FEN" || m == "SAR+ps"; }
inline LossKind loss_for(const std::string& m) { return m == "MLP" ? LossKind::Mse : LossKind::ListNet; }

/// Search space key for a model name.
inline SearchSpace search_space_for(const std::string& m) {
    if (m == "MLP") return mlp_search_space();
    if (m == "LN") return listnet_search_space();
    return encoder_search_space();
}

inline EncoderConfig encoder_config(std::size_t width, const HyperParams& h) {
    EncoderConfig c;
    c.input_width = width;
    c.d_model = h.d_model;
    c.d_ff = h.d_ff;
    c.heads = h.heads;
    c.layers = h.layers;
    c.dropout = h.dropout;
    return c;
}

using AnyModel = std::variant<MlpModel, SarModel, FusedModel>;

/// Builds an untrained model. Transfer models need the pre-trained source.
inline AnyModel build_model(const std::string& name, std::size_t width, const HyperParams& h, std::mt19937_64& rng,
                            const SarModel* source = nullptr) {
    if (name == "MLP" || name == "LN") return MlpModel(width, h.hidden_width, h.dropout, rng);
    if (name == "SAR") return SarModel(encoder_config(width, h), h.hidden_width, rng);
    if (!source) throw ConfigError(name + " training needs a pre-trained source model; run pretrain-source first");
    if (name == "SAR+ps") {
        SarModel m = SarModel::transplant(*source, width, rng);
        m.freeze_stack = true;
        return m;
    }
    if (name == "FEN") return FusedModel(source->stack, encoder_config(width, h), h.hidden_width, rng);
    throw ConfigError("unknown model '" + name + "'");
}

inline ParamRefs model_parameters(AnyModel& m) {
    return std::visit([](auto& x) { return x.parameters(); }, m);
}

inline TrainConfig train_config(const HyperParams& h, const TrainingSettings& s, std::uint64_t seed, LossKind loss) {
    TrainConfig c;
    c.max_epochs = s.max_epochs;
    c.patience = s.patience;
    c.batch_size = h.batch_size;
    c.learning_rate = h.learning_rate;
    c.seed = seed;
    c.loss = loss;
    return c;
}

struct FoldData {
    int year = 0;
    std::vector<RankingSample> train, validation, test;
};

inline FoldData fold_data(const std::vector<RankingSample>& samples, const Fold& f) {
    std::span<const RankingSample> all(samples);
    return {f.test_year, gather(all, f.train), gather(all, f.validation), gather(all, f.test)};
}

inline FoldData fold_for_year(const std::vector<RankingSample>& samples, int year) {
    return fold_data(samples, plan_windows(std::span<const RankingSample>(samples), year, year).folds.at(0));
}

template <class Model>
std::vector<WeekScores> score_samples(const Model& model, std::span<const RankingSample> samples,
                                      std::vector<Heatmap>* heatmaps = nullptr,
                                      std::vector<Heatmap>* source_heatmaps = nullptr) {
    std::vector<WeekScores> out;
    for (const auto& s : samples) {
        Tensor attention, source_attention;
        auto scores = predict(model, s.features, heatmaps ? &attention : nullptr,
                              source_heatmaps ? &source_attention : nullptr);
        if (heatmaps && attention.size() > 0) heatmaps->push_back({s.date, s.ids, attention, scores, std::nullopt});
        if (source_heatmaps && source_attention.size() > 0) {
            source_heatmaps->push_back({s.date, s.ids, source_attention, scores, std::nullopt});
        }
        out.push_back({s.date, std::move(scores)});
    }
    return out;
}

inline std::vector<WeekScores> score_samples(const AnyModel& model, std::span<const RankingSample> samples,
                                             std::vector<Heatmap>* heatmaps = nullptr,
                                             std::vector<Heatmap>* source_heatmaps = nullptr) {
    return std::visit([&](const auto& m) { return score_samples(m, samples, heatmaps, source_heatmaps); }, model);
}

/// Uniform random scores; the no-skill benchmark.
inline std::vector<WeekScores> random_scores(std::span<const RankingSample> samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<WeekScores> out;
    for (const auto& s : samples) {
        std::vector<double> v(s.size());
        for (auto& x : v) x = ad::unit_uniform(rng);
        out.push_back({s.date, std::move(v)});
    }
    return out;
}

inline std::size_t feature_column(const std::vector<std::string>& names, const std::string& name) {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw DataError("feature column '" + name + "' is missing");
    return static_cast<std::size_t>(it - names.begin());
}

inline std::vector<WeekScores> one_week_return_scores(std::span<const RankingSample> samples, std::size_t column) {
    std::vector<WeekScores> out;
    for (const auto& s : samples) out.push_back({s.date, one_week_return_signal(s.features, column)});
    return out;
}

inline double sharpe_of(const BacktestSeries& series, double vol_target) {
    return evaluate(series, vol_target).sharpe.value_or(0.0);
}

/// Per-side position count for a universe: explicit, else a quintile.
inline std::size_t positions_per_side(const DatasetConfig& d, std::size_t n) {
    return d.top_m.value_or(std::max<std::size_t>(1, n / 5));
}

// ---------------------------------------------------------------- search

/// Best validation loss reachable with `h`; divergent trials score +inf.
template <class Build>
double trial_loss(const FoldData& fold, const HyperParams& h, const TrainingSettings& s, std::uint64_t seed,
                  LossKind loss, const Build& build) {
    std::mt19937_64 rng(seed);
    AnyModel m = build(h, rng);
    try {
        return std::visit(
            [&](auto& x) { return train_model(x, fold.train, fold.validation, train_config(h, s, seed, loss)).best_validation_loss; },
            m);
    } catch (const DivergenceError&) {
        return std::numeric_limits<double>::infinity();
    }
}

struct ChosenParams {
    HyperParams params;
    std::optional<SearchResult> search;  // present when searched
};

template <class Build>
ChosenParams choose_params(const RunConfig& cfg, const std::string& key, const std::string& model, const FoldData& fold,
                           const Build& build) {
    if (cfg.search_iterations == 0) return {cfg.params_for(key), std::nullopt};
    const auto seed = derive_seed(cfg.seed, "search/" + key, {fold.year});
    auto res = hyper_search(search_space_for(model), cfg.search_iterations, seed, [&](const HyperParams& h) {
        return trial_loss(fold, h, cfg.training, derive_seed(seed, "trial", {}), loss_for(model), build);
    });
    return {res.best, std::move(res)};
}

// ---------------------------------------------------------------- source stage

struct SourceRun {
    int year = 0;  // source test year
    std::size_t candidate = 0;
    std::uint64_t seed = 0;
    std::size_t width = 0;  // feature width
    HyperParams params;
    std::vector<NamedTensor> weights;
    TrainHistory history;
    double sharpe = 0.0;
};

inline SarModel sar_from_weights(std::size_t width, const HyperParams& h, const std::vector<NamedTensor>& w) {
    std::mt19937_64 rng(0);
    SarModel m(encoder_config(width, h), h.hidden_width, rng);
    restore(m.parameters(), w);
    return m;
}

/// Trains one source candidate on `train_fold` and backtests it on `test_fold`
/// (they differ only when the training data is corrupted on purpose).
inline SourceRun train_source_candidate(const FoldData& train_fold, const FoldData& test_fold, const HyperParams& h,
                                        const TrainingSettings& s, std::uint64_t seed, std::size_t top_m,
                                        double vol_target, std::size_t candidate) {
    std::mt19937_64 rng(seed);
    const std::size_t width = train_fold.train.front().features.cols();
    SarModel m(encoder_config(width, h), h.hidden_width, rng);
    SourceRun r;
    r.year = test_fold.year;
    r.candidate = candidate;
    r.seed = seed;
    r.width = width;
    r.params = h;
    r.history = train_model(m, train_fold.train, train_fold.validation, train_config(h, s, seed, LossKind::ListNet));
    BacktestConfig bc;
    bc.top_m = top_m;
    bc.vol_target = vol_target;
    bc.ndcg_k = std::min<std::size_t>(2, test_fold.test.front().size());
    r.sharpe = sharpe_of(run_backtest(score_samples(m, test_fold.test), test_fold.test, bc), vol_target);
    r.weights = snapshot(m.parameters());
    return r;
}

using SourcePool = std::map<int, std::vector<SourceRun>>;  // source test year -> candidates

inline SourcePool run_source_stage(const RunConfig& cfg, const std::vector<RankingSample>& source, std::size_t top_m,
                                   std::map<int, ChosenParams>* chosen = nullptr) {
    SourcePool pool;
    for (int year = cfg.first_test_year - 1; year <= cfg.last_test_year - 1; ++year) {
        const FoldData fold = fold_for_year(source, year);
        const std::size_t width = source.front().features.cols();
        auto params = choose_params(cfg, "source", "SAR", fold, [&](const HyperParams& h, std::mt19937_64& rng) {
            return AnyModel(SarModel(encoder_config(width, h), h.hidden_width, rng));
        });
        std::vector<SourceRun> runs(cfg.candidates);
        parallel_for(cfg.candidates, cfg.workers, [&](std::size_t c) {
            runs[c] = train_source_candidate(fold, fold, params.params, cfg.training,
                                             derive_seed(cfg.seed, "source", {year, static_cast<std::int64_t>(c)}),
                                             top_m, cfg.vol_target, c);
        });
        pool[year] = std::move(runs);
        if (chosen) (*chosen)[year] = std::move(params);
    }
    return pool;
}

inline SourceSelection select_for_year(const SourcePool& pool, int target_year, SelectionMode mode, std::size_t take) {
    auto it = pool.find(target_year - 1);
    if (it == pool.end()) {
        throw DataError("no source models were backtested over " + std::to_string(target_year - 1) +
                        "; run pretrain-source first");
    }
    std::vector<SourceCandidate> cands;
    for (const auto& r : it->second) {
        cands.push_back({"source-" + std::to_string(r.year) + "-c" + std::to_string(r.candidate), r.seed, r.sharpe});
    }
    return select_source(std::move(cands), target_year, mode, take);
}

// ---------------------------------------------------------------- target stage

struct TargetRun {
    std::string model;
    int year = 0;
    std::size_t run = 0;
    std::uint64_t seed = 0;
    HyperParams params;
    std::optional<std::size_t> source_candidate;  // transfer models only
    std::vector<NamedTensor> weights;
    TrainHistory history;
    std::optional<TrainHistory> finetune_history;
};

/// Rebuilds a trained target model from its recorded weights.
inline AnyModel load_target_model(const TargetRun& r, std::size_t width, const SourcePool* pool = nullptr) {
    std::optional<SarModel> src;
    if (is_transfer_model(r.model)) {
        if (!pool || !r.source_candidate) throw ConfigError(r.model + " run has no source model recorded");
        const auto& s = pool->at(r.year - 1).at(*r.source_candidate);
        src = sar_from_weights(s.width, s.params, s.weights);
    }
    std::mt19937_64 rng(0);
    AnyModel m = build_model(r.model, width, r.params, rng, src ? &*src : nullptr);
    restore(model_parameters(m), r.weights);
    return m;
}

/// Stage-two training for every configured learned model and test year.
inline std::vector<TargetRun> run_target_stage(const RunConfig& cfg, const std::vector<RankingSample>& target,
                                               const SourcePool* pool, std::map<std::string, ChosenParams>* chosen = nullptr,
                                               std::vector<SourceSelection>* selections = nullptr,
                                               const StepHook& fen_hook = {}) {
    std::vector<TargetRun> out;
    const std::size_t width = target.front().features.cols();
    for (int year = cfg.first_test_year; year <= cfg.last_test_year; ++year) {
        const FoldData fold = fold_for_year(target, year);
        std::optional<SourceSelection> sel;
        std::map<std::size_t, SarModel> sources;
        for (const auto& model : model_order()) {
            if (!cfg.has_model(model) || model == "1WR") continue;
            if (is_transfer_model(model) && !sel) {
                if (!pool) throw ConfigError(model + " training needs source checkpoints; run pretrain-source first");
                sel = select_for_year(*pool, year, cfg.mode, cfg.take);
                for (std::size_t c : sel->chosen) {
                    const auto& s = pool->at(year - 1).at(c);
                    sources.emplace(c, sar_from_weights(s.width, s.params, s.weights));
                }
                if (selections) selections->push_back(*sel);
            }
            const SarModel* first_source = sel ? &sources.at(sel->chosen.front()) : nullptr;
            auto params = choose_params(cfg, model, model, fold, [&](const HyperParams& h, std::mt19937_64& rng) {
                return build_model(model, width, h, rng, first_source);
            });
            std::vector<TargetRun> runs(cfg.runs);
            const std::size_t per_source = cfg.runs / cfg.take;
            parallel_for(cfg.runs, cfg.workers, [&](std::size_t j) {
                TargetRun r;
                r.model = model;
                r.year = year;
                r.run = j;
                r.seed = derive_seed(cfg.seed, "target/" + model, {year, static_cast<std::int64_t>(j)});
                r.params = params.params;
                const SarModel* src = nullptr;
                if (is_transfer_model(model)) {
                    r.source_candidate = sel->chosen[j / per_source];
                    src = &sources.at(*r.source_candidate);
                }
                std::mt19937_64 rng(r.seed);
                AnyModel m = build_model(model, width, r.params, rng, src);
                const auto tc = train_config(r.params, cfg.training, r.seed, loss_for(model));
                r.history = std::visit(
                    [&](auto& x) { return train_model(x, fold.train, fold.validation, tc, model == "FEN" ? fen_hook : StepHook{}); },
                    m);
                r.weights = snapshot(model_parameters(m));
                runs[j] = std::move(r);
            });
            if (chosen) (*chosen)[model + "/" + std::to_string(year)] = std::move(params);
            for (auto& r : runs) out.push_back(std::move(r));
        }
    }
    return out;
}

/// Unfrozen retraining of the transfer models at the fixed fine-tune rate.
inline void run_finetune_stage(const RunConfig& cfg, const std::vector<RankingSample>& target, const SourcePool& pool,
                               std::vector<TargetRun>& runs) {
    const std::size_t width = target.front().features.cols();
    std::map<int, FoldData> folds;
    for (const auto& r : runs) {
        if (is_transfer_model(r.model) && !folds.count(r.year)) folds.emplace(r.year, fold_for_year(target, r.year));
    }
    parallel_for(runs.size(), cfg.workers, [&](std::size_t i) {
        TargetRun& r = runs[i];
        if (!is_transfer_model(r.model)) return;
        AnyModel m = load_target_model(r, width, &pool);
        FinetuneConfig fc;
        fc.max_epochs = cfg.finetune.max_epochs;
        fc.patience = cfg.finetune.patience;
        fc.batch_size = cfg.finetune.batch_size.value_or(r.params.batch_size);
        fc.seed = derive_seed(r.seed, "finetune", {});
        const FoldData& fold = folds.at(r.year);
        r.finetune_history = std::visit(
            [&](auto& x) -> TrainHistory {
                if constexpr (std::is_same_v<std::decay_t<decltype(x)>, MlpModel>) {
                    throw ConfigError("MLP models are not fine-tuned");
                } else {
                    return finetune(x, fold.train, fold.validation, fc);
                }
            },
            m);
        r.weights = snapshot(model_parameters(m));
    });
}

// ---------------------------------------------------------------- backtest stage

struct BacktestOutput {
    RunSeries series;                                    // model -> per-run series over all test years
    std::map<std::size_t, std::vector<Heatmap>> fen_heatmaps;  // run -> heatmaps
    std::map<std::size_t, std::vector<Heatmap>> fen_source_heatmaps;  // only with heatmaps.source_attention
};

inline std::vector<RankingSample> test_samples(const std::vector<RankingSample>& target, int first, int last) {
    std::vector<RankingSample> out;
    for (const auto& s : target) {
        if (s.date.year() >= first && s.date.year() <= last) out.push_back(s);
    }
    if (out.empty()) throw DataError("no rebalance dates between " + std::to_string(first) + " and " + std::to_string(last));
    return out;
}

inline BacktestConfig backtest_config(const RunConfig& cfg) {
    BacktestConfig bc;
    bc.vol_target = cfg.vol_target;
    bc.top_m = cfg.top_m;
    bc.ndcg_k = cfg.ndcg_k;
    bc.cost_bps = cfg.cost_bps;
    return bc;
}

inline BacktestOutput run_backtest_stage(const RunConfig& cfg, const std::vector<RankingSample>& target,
                                         const std::vector<std::string>& feature_names,
                                         const std::vector<TargetRun>& runs, const SourcePool* pool) {
    const auto test = test_samples(target, cfg.first_test_year, cfg.last_test_year);
    const std::size_t width = target.front().features.cols();
    const auto bc = backtest_config(cfg);
    BacktestOutput out;
    if (cfg.has_model("1WR")) {
        out.series["1WR"].push_back(run_backtest(one_week_return_scores(test, feature_column(feature_names, "norm_1")), test, bc));
    }
    std::map<std::string, std::map<std::size_t, std::vector<const TargetRun*>>> grouped;
    for (const auto& r : runs) grouped[r.model][r.run].push_back(&r);
    for (const auto& [model, by_run] : grouped) {
        std::vector<BacktestSeries> series(by_run.size());
        std::vector<std::vector<Heatmap>> maps(by_run.size()), source_maps(by_run.size());
        const bool fen = model == "FEN";
        std::vector<const std::vector<const TargetRun*>*> slots;
        for (const auto& [j, rs] : by_run) slots.push_back(&rs);
        parallel_for(slots.size(), cfg.workers, [&](std::size_t k) {
            std::vector<WeekScores> scores;
            for (const TargetRun* r : *slots[k]) {
                const AnyModel m = load_target_model(*r, width, pool);
                std::vector<RankingSample> year;
                for (const auto& s : test) {
                    if (s.date.year() == r->year) year.push_back(s);
                }
                auto sc = score_samples(m, year, fen ? &maps[k] : nullptr,
                                        fen && cfg.source_attention ? &source_maps[k] : nullptr);
                scores.insert(scores.end(), sc.begin(), sc.end());
            }
            series[k] = run_backtest(scores, test, bc);
        });
        out.series[model] = std::move(series);
        if (fen) {
            std::size_t k = 0;
            for (const auto& [j, rs] : by_run) {
                out.fen_heatmaps[j] = std::move(maps[k]);
                if (cfg.source_attention) out.fen_source_heatmaps[j] = std::move(source_maps[k]);
                ++k;
            }
        }
    }
    return out;
}

}  // namespace fen
