#pragma once

// Run configuration: JSON with a fixed schema. Unknown keys and wrong types
// are rejected. Relative paths resolve against the config file's directory.
// Environment variables FEN_TARGET_PRICES, FEN_SOURCE_PRICES,
// FEN_INDEX_PRICES and FEN_OUTPUT_DIR override the matching paths and
// nothing else.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fen/core/error.hpp"
#include "fen/data/features.hpp"
#include "fen/data/prices.hpp"
#include "fen/data/regimes.hpp"
#include "fen/train/search.hpp"
#include "fen/report/tables.hpp"
#include "fen/train/selection.hpp"

namespace fen {

using Json = nlohmann::json;

struct DatasetConfig {
    std::string prices;  // date,symbol,close
    std::vector<std::string> universe;
    FeatureConfig features;
    WeeklyOptions weekly;
    std::optional<std::size_t> top_m;  // per-side positions; default max(1, n/5)
};

struct TrainingSettings {
    std::size_t max_epochs = 100;
    std::size_t patience = 25;
};

struct FinetuneSettings {
    std::size_t max_epochs = 100;
    std::size_t patience = 10;
    std::optional<std::size_t> batch_size;  // default: the stage-two batch size
};

struct RunConfig {
    std::filesystem::path output_dir;
    DatasetConfig target;
    DatasetConfig source;
    std::optional<std::string> index_prices;  // date,close of the risk index
    int first_test_year = 0;
    int last_test_year = 0;
    double vol_target = 0.15;
    std::size_t top_m = 2;
    std::size_t ndcg_k = 2;
    double cost_bps = 0.0;
    std::size_t runs = 10;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::vector<std::string> models{"1WR", "MLP", "LN", "SAR", "SAR+ps", "FEN"};
    SelectionMode mode = SelectionMode::Best;
    std::size_t take = 2;
    std::size_t candidates = 10;
    TrainingSettings training;
    FinetuneSettings finetune;
    std::size_t search_iterations = 0;  // 0 = use `hyperparameters` as given
    std::map<std::string, HyperParams> hyperparameters;
    RegimeOptions regimes;
    std::string heatmap_group_by = "regime";
    bool source_attention = false;  // also export the source stack's attention

    bool has_model(const std::string& m) const { return std::find(models.begin(), models.end(), m) != models.end(); }

    /// Fixed hyperparameters for a model key ("MLP", "LN", "SAR", "source", "FEN").
    HyperParams params_for(const std::string& key) const {
        auto it = hyperparameters.find(key);
        return it == hyperparameters.end() ? HyperParams{} : it->second;
    }
};

namespace detail {

inline void check_keys(const Json& obj, const std::string& where, const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
}

template <class T>
T get(const Json& obj, const std::string& key, const std::string& where) {
    const Json& v = obj.at(key);
    const std::string path = where + "." + key;
    if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(path + ": expected a string");
    } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(path + ": expected a boolean");
    } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError(path + ": expected a number");
    } else if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_unsigned()) throw ConfigError(path + ": expected a nonnegative integer");
    } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
    }
    return v.get<T>();
}

template <class T>
void read(const Json& obj, const std::string& key, const std::string& where, T& out) {
    if (obj.contains(key)) out = get<T>(obj, key, where);
}

inline std::vector<std::string> string_list(const Json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError(where + ": expected an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
        if (!e.is_string()) throw ConfigError(where + ": expected an array of strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

inline HyperParams parse_hyper(const Json& j, const std::string& where) {
    check_keys(j, where,
               {"dropout", "hidden_width", "batch_size", "learning_rate", "d_model", "d_ff", "layers", "heads"});
    HyperParams h;
    read(j, "dropout", where, h.dropout);
    read(j, "hidden_width", where, h.hidden_width);
    read(j, "batch_size", where, h.batch_size);
    read(j, "learning_rate", where, h.learning_rate);
    read(j, "d_model", where, h.d_model);
    read(j, "d_ff", where, h.d_ff);
    read(j, "layers", where, h.layers);
    read(j, "heads", where, h.heads);
    return h;
}

inline DatasetConfig parse_dataset(const Json& j, const std::string& where) {
    check_keys(j, where, {"prices", "universe", "horizons", "anchor_weekday", "max_fill_days", "top_m", "winsorise"});
    DatasetConfig d;
    if (!j.contains("prices")) throw ConfigError(where + ".prices is required");
    d.prices = get<std::string>(j, "prices", where);
    if (j.contains("universe")) d.universe = string_list(j["universe"], where + ".universe");
    if (j.contains("horizons")) {
        if (!j["horizons"].is_array()) throw ConfigError(where + ".horizons: expected an array of integers");
        d.features.horizons.clear();
        for (const auto& h : j["horizons"]) {
            if (!h.is_number_integer()) throw ConfigError(where + ".horizons: expected an array of integers");
            d.features.horizons.push_back(h.get<int>());
        }
    }
    read(j, "winsorise", where, d.features.winsorise);
    d.features.validate();
    if (j.contains("anchor_weekday")) d.weekly.anchor_weekday = get<unsigned>(j, "anchor_weekday", where);
    read(j, "max_fill_days", where, d.weekly.max_fill_days);
    if (j.contains("top_m")) d.top_m = get<std::size_t>(j, "top_m", where);
    return d;
}

inline std::string resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return (path.is_absolute() ? path : base / path).lexically_normal().string();
}

}  // namespace detail

/// Parses and validates a config document. `base_dir` anchors relative paths.
inline RunConfig parse_run_config(const Json& j, const std::filesystem::path& base_dir = ".") {
    using namespace detail;
    const std::string w = "config";
    check_keys(j, w,
               {"output_dir", "target", "source", "index_prices", "first_test_year", "last_test_year", "vol_target",
                "top_m", "ndcg_k", "cost_bps", "runs", "seed", "workers", "models", "selection", "training",
                "finetune", "search", "hyperparameters", "regimes", "heatmaps"});
    for (const char* req : {"output_dir", "target", "source", "first_test_year", "last_test_year", "seed"}) {
        if (!j.contains(req)) throw ConfigError("config." + std::string(req) + " is required");
    }
    RunConfig c;
    c.output_dir = get<std::string>(j, "output_dir", w);
    c.target = parse_dataset(j["target"], w + ".target");
    c.source = parse_dataset(j["source"], w + ".source");
    if (j.contains("index_prices")) c.index_prices = get<std::string>(j, "index_prices", w);
    c.first_test_year = get<int>(j, "first_test_year", w);
    c.last_test_year = get<int>(j, "last_test_year", w);
    c.seed = get<std::uint64_t>(j, "seed", w);
    read(j, "vol_target", w, c.vol_target);
    read(j, "top_m", w, c.top_m);
    read(j, "ndcg_k", w, c.ndcg_k);
    read(j, "cost_bps", w, c.cost_bps);
    read(j, "runs", w, c.runs);
    read(j, "workers", w, c.workers);
    if (j.contains("models")) c.models = string_list(j["models"], w + ".models");
    if (j.contains("selection")) {
        const auto& s = j["selection"];
        check_keys(s, w + ".selection", {"mode", "take", "candidates"});
        if (s.contains("mode")) c.mode = parse_selection_mode(get<std::string>(s, "mode", w + ".selection"));
        read(s, "take", w + ".selection", c.take);
        read(s, "candidates", w + ".selection", c.candidates);
    }
    if (j.contains("training")) {
        check_keys(j["training"], w + ".training", {"max_epochs", "patience"});
        read(j["training"], "max_epochs", w + ".training", c.training.max_epochs);
        read(j["training"], "patience", w + ".training", c.training.patience);
    }
    if (j.contains("finetune")) {
        const auto& f = j["finetune"];
        check_keys(f, w + ".finetune", {"max_epochs", "patience", "batch_size"});
        read(f, "max_epochs", w + ".finetune", c.finetune.max_epochs);
        read(f, "patience", w + ".finetune", c.finetune.patience);
        if (f.contains("batch_size")) c.finetune.batch_size = get<std::size_t>(f, "batch_size", w + ".finetune");
    }
    if (j.contains("search")) {
        check_keys(j["search"], w + ".search", {"iterations"});
        read(j["search"], "iterations", w + ".search", c.search_iterations);
    }
    if (j.contains("hyperparameters")) {
        const auto& h = j["hyperparameters"];
        check_keys(h, w + ".hyperparameters", {"MLP", "LN", "SAR", "source", "FEN"});
        for (auto it = h.begin(); it != h.end(); ++it) {
            c.hyperparameters[it.key()] = parse_hyper(it.value(), w + ".hyperparameters." + it.key());
        }
    }
    if (j.contains("regimes")) {
        check_keys(j["regimes"], w + ".regimes", {"window", "threshold"});
        read(j["regimes"], "window", w + ".regimes", c.regimes.window);
        read(j["regimes"], "threshold", w + ".regimes", c.regimes.threshold);
    }
    if (j.contains("heatmaps")) {
        check_keys(j["heatmaps"], w + ".heatmaps", {"group_by", "source_attention"});
        read(j["heatmaps"], "group_by", w + ".heatmaps", c.heatmap_group_by);
        read(j["heatmaps"], "source_attention", w + ".heatmaps", c.source_attention);
    }

    auto env = [](const char* name) -> std::optional<std::string> {
        const char* v = std::getenv(name);
        return v && *v ? std::optional<std::string>(v) : std::nullopt;
    };
    if (auto v = env("FEN_TARGET_PRICES")) c.target.prices = *v;
    if (auto v = env("FEN_SOURCE_PRICES")) c.source.prices = *v;
    if (auto v = env("FEN_INDEX_PRICES")) c.index_prices = *v;
    if (auto v = env("FEN_OUTPUT_DIR")) c.output_dir = *v;

    c.target.prices = resolve(base_dir, c.target.prices);
    c.source.prices = resolve(base_dir, c.source.prices);
    if (c.index_prices) c.index_prices = resolve(base_dir, *c.index_prices);
    c.output_dir = resolve(base_dir, c.output_dir.string());
    return c;
}

inline void validate_run_config(const RunConfig& c) {
    for (const auto& p : {c.target.prices, c.source.prices}) {
        if (!std::filesystem::exists(p)) throw ConfigError("input file does not exist: " + p);
    }
    if (c.index_prices && !std::filesystem::exists(*c.index_prices)) {
        throw ConfigError("input file does not exist: " + *c.index_prices);
    }
    if (c.last_test_year < c.first_test_year) throw ConfigError("last_test_year precedes first_test_year");
    if (!(c.vol_target > 0.0)) throw ConfigError("vol_target must be positive");
    if (c.top_m == 0) throw ConfigError("top_m must be positive");
    if (c.ndcg_k == 0) throw ConfigError("ndcg_k must be positive");
    if (c.cost_bps < 0.0) throw ConfigError("cost_bps must be nonnegative");
    if (c.runs == 0) throw ConfigError("runs must be positive");
    if (c.workers == 0) throw ConfigError("workers must be positive");
    if (c.take == 0 || c.take > c.candidates) throw ConfigError("selection.take must lie in [1, candidates]");
    if (c.runs % c.take != 0) {
        throw ConfigError("runs (" + std::to_string(c.runs) + ") must be a multiple of selection.take (" +
                          std::to_string(c.take) + ")");
    }
    for (const auto& m : c.models) {
        if (std::find(model_order().begin(), model_order().end(), m) == model_order().end()) {
            throw ConfigError("unknown model '" + m + "'");
        }
    }
    if (c.heatmap_group_by != "regime" && c.heatmap_group_by != "date_range") {
        throw ConfigError("heatmaps.group_by must be 'regime' or 'date_range'");
    }
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    return parse_run_config(j, std::filesystem::absolute(path).parent_path());
}

}  // namespace fen
