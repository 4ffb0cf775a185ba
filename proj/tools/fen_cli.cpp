#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fen/app/dataset.hpp"
#include "fen/app/stages.hpp"

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> runs, top_m, workers;
    std::optional<double> cost_bps, vol_target;
    std::optional<std::string> mode;
};

fen::RunConfig resolve_config(const Overrides& o) {
    if (o.config.empty()) throw fen::ConfigError("--config is required");
    auto cfg = fen::load_run_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (o.runs) cfg.runs = *o.runs;
    if (o.top_m) cfg.top_m = *o.top_m;
    if (o.workers) cfg.workers = *o.workers;
    if (o.cost_bps) cfg.cost_bps = *o.cost_bps;
    if (o.vol_target) cfg.vol_target = *o.vol_target;
    if (o.mode) cfg.mode = fen::parse_selection_mode(*o.mode);
    fen::validate_run_config(cfg);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Transfer ranking pipeline for cross-sectional momentum."};
    app.require_subcommand(1);
    Overrides o;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "JSON run configuration")->required();
        sub->add_option("--seed", o.seed, "master seed (overrides config)");
        sub->add_option("--runs", o.runs, "independent runs per model (default 10)");
        sub->add_option("--cost-bps", o.cost_bps, "transaction cost in basis points");
        sub->add_option("--top-m", o.top_m, "positions per side (default 2)");
        sub->add_option("--vol-target", o.vol_target, "annualised volatility target (default 0.15)");
        sub->add_option("--mode", o.mode, "source selection")->check(CLI::IsMember({"best", "worst"}));
        sub->add_option("--workers", o.workers, "parallel training workers");
    };

    using Stage = void (*)(const fen::RunConfig&);
    const std::vector<std::pair<std::string, std::pair<std::string, Stage>>> stages{
        {"prepare-data", {"build weekly ranking samples and window plans", [](const fen::RunConfig& c) { fen::stage_prepare_data(c); }}},
        {"pretrain-source", {"train source candidates per year", [](const fen::RunConfig& c) { fen::stage_pretrain_source(c); }}},
        {"train-target", {"train target models", [](const fen::RunConfig& c) { fen::stage_train_target(c, fen::OutputTree(c.output_dir)); }}},
        {"finetune", {"unfreeze and fine-tune transfer models", [](const fen::RunConfig& c) { fen::stage_finetune(c, fen::OutputTree(c.output_dir)); }}},
        {"backtest", {"score test years and compute weekly series", [](const fen::RunConfig& c) { fen::stage_backtest(c, fen::OutputTree(c.output_dir)); }}},
        {"report", {"write metric, NDCG, turnover, cost and segment tables", [](const fen::RunConfig& c) { fen::stage_report(c, fen::OutputTree(c.output_dir)); }}},
        {"heatmaps", {"aggregate FEN attention heatmaps", [](const fen::RunConfig& c) { fen::stage_heatmaps(c, fen::OutputTree(c.output_dir)); }}},
        {"negative-transfer", {"rerun transfer models with the worst source candidates", [](const fen::RunConfig& c) { fen::stage_negative_transfer(c); }}},
        {"run-all", {"run every stage in order", [](const fen::RunConfig& c) { fen::run_all(c); }}},
    };
    Stage chosen = nullptr;
    for (const auto& [name, desc] : stages) {
        auto* sub = app.add_subcommand(name, desc.first);
        add_common(sub);
        sub->callback([&chosen, fn = desc.second] { chosen = fn; });
    }

    fen::SyntheticDataset so;
    auto* synth = app.add_subcommand("make-synthetic", "write a synthetic dataset and config");
    synth->add_option("--out", so.out, "output directory");
    synth->add_option("--seed", so.seed, "generator seed");
    synth->add_option("--target-weeks", so.target_weeks);
    synth->add_option("--source-weeks", so.source_weeks);

    CLI11_PARSE(app, argc, argv);
    try {
        if (synth->parsed()) {
            fen::write_synthetic_dataset(so);
        } else if (chosen) {
            chosen(resolve_config(o));
        }
    } catch (const fen::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
