// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset. FEN_ACCEPTANCE_CONFIG points criterion 9 at
// a real-data config instead of the synthetic stand-in.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <set>
#include <sstream>
#include <unistd.h>

#include "audits.hpp"
#include "fen/app/dataset.hpp"
#include "fen/app/stages.hpp"
#include "model_fixtures.hpp"
#include "oracles.hpp"

using namespace fen;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

fs::path scratch() {
    static const fs::path p = [] {
        auto d = fs::temp_directory_path() / ("fen_acceptance_" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return p;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- 1

Outcome gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = testing::gradient_check_all_models(20, 20240601);
    const double secs = seconds_since(t0);
    double worst = 0.0;
    std::string per;
    std::set<std::string> seen;
    for (const auto& [name, r] : res) {
        worst = std::max(worst, r.max_rel_error);
        per += fmt(" %s=%.1e", name.c_str(), r.max_rel_error);
        seen.insert(name);
    }
    const bool all = seen.size() == 7;
    return {all && worst <= 1e-4 && secs < 120.0, fmt("max rel err %.2e over 20 draws (%.1fs);", worst, secs) + per};
}

// ---------------------------------------------------------------- 2

Outcome ndcg_oracle() {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> bin(0, 4);
    double worst = 0.0;
    std::size_t cases = 0;
    for (std::size_t n = 1; n <= 6; ++n) {
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<int> y(n);
            for (auto& v : y) v = bin(rng);
            std::vector<double> s(n);
            for (auto& v : s) v = 10.0 * ad::unit_uniform(rng) - 5.0;
            for (std::size_t k = 1; k <= n; ++k) {
                for (bool up : {true, false}) {
                    const auto got = ndcg_at_k(y, s, k, up ? Direction::Long : Direction::Short);
                    worst = std::max(worst, std::abs(got - testing::brute_ndcg(y, s, k, up)));
                    ++cases;
                }
            }
        }
    }
    return {worst <= 1e-12, fmt("max |diff| %.2e over %zu (n, k, direction) cases", worst, cases)};
}

// ---------------------------------------------------------------- 3

Outcome listnet_contract() {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> bin(0, 4);
    double min_loss = INFINITY, entropy_gap = 0.0, shift_gap = 0.0;
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(trial % 30);
        std::vector<int> y(n);
        for (auto& v : y) v = bin(rng);
        std::vector<double> s(n);
        for (auto& v : s) v = 6.0 * ad::unit_uniform(rng) - 3.0;
        const double loss = listnet_loss(y, s);
        min_loss = std::min(min_loss, loss);
        const std::vector<double> same(y.begin(), y.end());
        entropy_gap = std::max(entropy_gap, std::abs(listnet_loss(y, same) - testing::softmax_entropy(y)));
        const double c = 20.0 * ad::unit_uniform(rng) - 10.0;
        for (auto& v : s) v += c;
        shift_gap = std::max(shift_gap, std::abs(listnet_loss(y, s) - loss));
    }
    return {min_loss >= 0.0 && entropy_gap <= 1e-10 && shift_gap <= 1e-12,
            fmt("min loss %.3g, |loss(y,y) - H| %.1e, shift gap %.1e", min_loss, entropy_gap, shift_gap)};
}

// ---------------------------------------------------------------- 4

Outcome backtest_analytics() {
    const std::vector<double> vols(4, 0.15);
    const std::vector<double> r{0.02, 0.04, -0.01, -0.03};
    const double csm = csm_return(std::vector<int>{1, 1, -1, -1}, vols, r);
    const bool hand = csm == 0.025;
    const double flip = turnover(std::vector<int>{-1, 0, 0, 0}, std::vector<int>{1, 0, 0, 0}, vols, vols);

    SyntheticMarket m{synthetic_symbols("C", 10), Date::from_ymd(2012, 1, 2), 200, false};
    m.seed = 4;
    const auto samples = prepare_samples(generate_market(m), FeatureConfig{});
    std::vector<WeekScores> scores;
    for (const auto& s : samples) scores.push_back({s.date, s.next_returns});
    const auto series = run_backtest(scores, samples);
    bool monotone = true;
    double prev = INFINITY;
    for (int bps = 0; bps <= 30; ++bps) {
        const auto net = apply_costs(series, bps);
        const double sh = *evaluate(net).sharpe;
        monotone = monotone && sh <= prev;
        for (std::size_t i = 0; i < net.size() && bps > 0; ++i) monotone = monotone && net.net[i] <= series.gross[i];
        prev = sh;
    }

    const auto audit = testing::truncation_audit(200, 44, 1);
    const bool audit_ok = audit.checked >= 190 && audit.feature_mismatches == 0 && audit.position_mismatches == 0 &&
                          audit.labels_unchanged == 0;
    return {hand && flip == 2.0 && monotone && audit_ok,
            fmt("csm %.17g, flip turnover %.17g, cost-monotone %s, audit %zu weeks: %zu feature / %zu position "
                "mismatches, %zu unmoved labels %s",
                csm, flip, monotone ? "yes" : "no", audit.checked, audit.feature_mismatches, audit.position_mismatches,
                audit.labels_unchanged, audit.first_failure.c_str())};
}

// ---------------------------------------------------------------- 5

Outcome freeze_contract() {
    SyntheticMarket tm{synthetic_symbols("T", 10), Date::from_ymd(2014, 1, 6), 140, false};
    tm.seed = 51;
    const auto samples = prepare_samples(generate_market(tm), FeatureConfig{});
    const std::span<const RankingSample> all(samples);
    const std::size_t n_val = validation_size(samples.size());
    const auto train = all.first(samples.size() - n_val), val = all.last(n_val);
    const std::size_t width = samples.front().features.cols();

    std::mt19937_64 rng(5);
    SarModel source({width, 8, 8, 1, 1, 0.1}, 8, rng);
    train_model(source, train, val, TrainConfig{3, 3, 8, 1e-3, 1, LossKind::ListNet});
    FusedModel fen(source.stack, {width, 8, 8, 1, 1, 0.1}, 8, rng);
    const auto initial = snapshot(fen.source_parameters());

    std::size_t steps = 0, moved = 0;
    auto same_as_initial = [&] {
        const auto now = snapshot(fen.source_parameters());
        for (std::size_t i = 0; i < now.size(); ++i) {
            if (now[i].value.storage() != initial[i].value.storage()) return false;
        }
        return true;
    };
    const auto target_before = snapshot(fen.parameters());
    train_model(fen, train, val, TrainConfig{8, 100, 8, 1e-3, 2, LossKind::ListNet}, [&](std::size_t s) {
        steps = s;
        if (!same_as_initial()) ++moved;
    });
    const auto target_after = snapshot(fen.parameters());
    bool trained = false;
    for (std::size_t i = 0; i < target_after.size(); ++i) trained = trained || target_after[i].value.storage() != target_before[i].value.storage();

    finetune(fen, train, val, FinetuneConfig{3, 10, 8, 3, LossKind::ListNet});
    const auto tuned = snapshot(fen.source_parameters());
    double delta = 0.0;
    for (std::size_t i = 0; i < tuned.size(); ++i) {
        for (std::size_t j = 0; j < tuned[i].value.size(); ++j) {
            delta = std::max(delta, std::abs(tuned[i].value[j] - initial[i].value[j]));
        }
    }
    return {steps >= 50 && moved == 0 && trained && delta > 0.0,
            fmt("%zu frozen steps, %zu with a moved source tensor; after fine-tune at lr %.0e max |delta| %.2e", steps,
                moved, kFinetuneLearningRate, delta)};
}

// ---------------------------------------------------------------- 6 and 7

struct Synthetic {
    RunConfig cfg;
    OutputTree tree{"."};
};

Synthetic synthetic_pipeline_inputs(const std::string& name, std::uint64_t seed) {
    SyntheticDataset ds;
    ds.out = (scratch() / name).string();
    ds.seed = seed;
    ds.target_weeks = 300;
    write_synthetic_dataset(ds);
    Synthetic s;
    s.cfg = load_run_config((fs::path(ds.out) / "config.json").string());
    s.cfg.models = {"FEN"};
    s.cfg.runs = 10;
    s.tree = OutputTree(s.cfg.output_dir);
    return s;
}

std::vector<double> random_scorer_sharpes(const RunConfig& cfg, const std::vector<RankingSample>& target) {
    const auto test = test_samples(target, cfg.first_test_year, cfg.last_test_year);
    std::vector<double> out;
    for (std::size_t j = 0; j < cfg.runs; ++j) {
        const auto scores = random_scores(test, derive_seed(cfg.seed, "random", {static_cast<std::int64_t>(j)}));
        out.push_back(sharpe_of(run_backtest(scores, test, backtest_config(cfg)), cfg.vol_target));
    }
    return out;
}

Outcome synthetic_separation() {
    const auto t0 = std::chrono::steady_clock::now();
    auto s = synthetic_pipeline_inputs("separation", 6);
    validate_run_config(s.cfg);
    stage_prepare_data(s.cfg);
    stage_pretrain_source(s.cfg);
    stage_train_target(s.cfg, s.tree);
    stage_finetune(s.cfg, s.tree);
    stage_backtest(s.cfg, s.tree);
    const auto series = load_series(s.tree).at("FEN");
    const auto random = random_scorer_sharpes(s.cfg, detail::load_data(s.tree).target);
    const double secs = seconds_since(t0);
    std::size_t wins = 0;
    std::string per;
    for (std::size_t j = 0; j < series.size(); ++j) {
        const double f = sharpe_of(series[j], s.cfg.vol_target);
        wins += f - random[j] >= 1.0;
        per += fmt(" %.2f/%.2f", f, random[j]);
    }
    return {series.size() == 10 && wins >= 8 && secs < 900.0,
            fmt("%zu of %zu runs beat the random scorer by >= 1.0 Sharpe (%.0fs); FEN/random:", wins, series.size(), secs) +
                per};
}

Outcome negative_transfer() {
    auto s = synthetic_pipeline_inputs("negative", 7);
    s.cfg.candidates = 8;
    validate_run_config(s.cfg);
    stage_prepare_data(s.cfg);
    const auto d = detail::load_data(s.tree);

    // Half the candidates learn from the source panel with its labels
    // shuffled; every candidate is scored on the untouched panel.
    SourcePool pool;
    std::set<std::pair<int, std::size_t>> corrupted;
    for (int year = s.cfg.first_test_year - 1; year <= s.cfg.last_test_year - 1; ++year) {
        const FoldData clean = fold_for_year(d.source, year);
        FoldData noisy = clean;
        noisy.train = shuffle_labels(noisy.train, derive_seed(s.cfg.seed, "shuffle/train", {year}));
        noisy.validation = shuffle_labels(noisy.validation, derive_seed(s.cfg.seed, "shuffle/val", {year}));
        for (std::size_t c = 0; c < s.cfg.candidates; ++c) {
            const bool bad = c % 2 == 1;
            if (bad) corrupted.insert({year, c});
            pool[year].push_back(train_source_candidate(bad ? noisy : clean, clean, s.cfg.params_for("source"),
                                                        s.cfg.training,
                                                        derive_seed(s.cfg.seed, "source", {year, static_cast<std::int64_t>(c)}),
                                                        d.source_top_m, s.cfg.vol_target, c));
        }
    }

    auto mean_sharpe = [&](SelectionMode mode, std::size_t& picked_bad) {
        RunConfig cfg = s.cfg;
        cfg.mode = mode;
        auto runs = run_target_stage(cfg, d.target, &pool);
        run_finetune_stage(cfg, d.target, pool, runs);
        std::set<std::pair<int, std::size_t>> used;
        for (const auto& r : runs) used.insert({r.year - 1, *r.source_candidate});
        picked_bad = 0;
        for (const auto& u : used) picked_bad += corrupted.count(u);
        const auto out = run_backtest_stage(cfg, d.target, d.target_names, runs, &pool);
        double total = 0.0;
        for (const auto& series : out.series.at("FEN")) total += sharpe_of(series, cfg.vol_target);
        return total / static_cast<double>(out.series.at("FEN").size());
    };
    std::size_t bad_best = 0, bad_worst = 0;
    const double best = mean_sharpe(SelectionMode::Best, bad_best);
    const double worst = mean_sharpe(SelectionMode::Worst, bad_worst);
    return {worst < best, fmt("mean FEN Sharpe over 10 runs: best-2 %.3f, worst-2 %.3f; corrupted sources picked: "
                              "best %zu of 4, worst %zu of 4",
                              best, worst, bad_best, bad_worst)};
}

// ---------------------------------------------------------------- 8 and 9

std::map<std::string, std::string> read_tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        out[fs::relative(e.path(), root).string()] = std::string(std::istreambuf_iterator<char>(in), {});
    }
    return out;
}

fs::path& determinism_tree() {
    static fs::path p;
    return p;
}

Outcome determinism() {
    SyntheticDataset ds;
    ds.out = (scratch() / "determinism").string();
    ds.seed = 8;
    write_synthetic_dataset(ds);
    auto cfg = load_run_config((fs::path(ds.out) / "config.json").string());
    cfg.runs = 2;
    const fs::path a = fs::path(ds.out) / "run_a", b = fs::path(ds.out) / "run_b";
    cfg.output_dir = a;
    run_all(cfg);
    cfg.output_dir = b;
    cfg.workers = 2;
    run_all(cfg);
    determinism_tree() = a;
    const auto ta = read_tree(a), tb = read_tree(b);
    std::size_t differing = 0;
    std::string first;
    for (const auto& [path, bytes] : ta) {
        auto it = tb.find(path);
        if (it == tb.end() || it->second != bytes) {
            if (first.empty()) first = " first: " + path;
            ++differing;
        }
    }
    const bool same = ta.size() == tb.size() && differing == 0;
    return {same && ta.size() > 10, fmt("%zu vs %zu files, %zu differ (second run with 2 workers)", ta.size(), tb.size(), differing) + first};
}

std::vector<std::string> lines_of(const fs::path& p) {
    return fs::exists(p) ? csv::read_lines(p.string()) : std::vector<std::string>{};
}

Outcome report_fidelity() {
    fs::path root;
    std::string source = "synthetic stand-in";
    std::size_t top_m = 2;
    if (const char* real = std::getenv("FEN_ACCEPTANCE_CONFIG"); real && *real) {
        auto cfg = load_run_config(real);
        run_all(cfg);
        root = cfg.output_dir;
        top_m = cfg.top_m;
        source = real;
    } else {
        if (determinism_tree().empty()) determinism();
        root = determinism_tree();
    }
    const fs::path rep = root / "report";
    std::vector<std::string> problems;
    auto expect = [&](bool ok, const std::string& what) {
        if (!ok) problems.push_back(what);
    };

    const std::string wide = csv::join(detail::model_columns("metric"));
    const auto metrics = lines_of(rep / "metrics_table.csv");
    expect(metrics.size() == 11 && metrics[0] == wide, "metrics_table.csv header/rows");
    const std::vector<std::string> rows{"expected_return", "volatility", "raw_volatility", "sharpe", "sortino", "calmar",
                                        "downside_deviation", "max_drawdown", "profit_loss_ratio", "hit_rate"};
    for (std::size_t i = 0; i < rows.size() && i + 1 < metrics.size(); ++i) {
        expect(csv::split(metrics[i + 1]).front() == rows[i], "metrics_table.csv row " + rows[i]);
        expect(csv::split(metrics[i + 1]).size() == 13, "metrics_table.csv width");
    }
    const auto sharpe_row = metrics.size() > 4 ? csv::split(metrics[4]) : std::vector<std::string>{};
    for (std::size_t c = 1; c < sharpe_row.size(); c += 2) expect(!sharpe_row[c].empty(), "sharpe mean missing for a model");

    const auto ndcg = lines_of(rep / "ndcg_table.csv");
    expect(ndcg.size() == 2 && ndcg[0] == wide && ndcg[1].rfind("ndcg_at_", 0) == 0, "ndcg_table.csv");
    const auto turn = lines_of(rep / "turnover_table.csv");
    expect(turn.size() == 2 && turn[0] == wide && turn[1].rfind("turnover,", 0) == 0, "turnover_table.csv");

    const auto cost = lines_of(rep / "cost_sharpe_table.csv");
    expect(cost.size() == 8 && cost[0] == csv::join(detail::model_columns("cost_bps")), "cost_sharpe_table.csv header");
    for (std::size_t i = 1; i < cost.size(); ++i) {
        expect(csv::split(cost[i]).front() == std::to_string(5 * (i - 1)), "cost grid row " + std::to_string(i));
    }

    const auto seg = lines_of(rep / "segmented_returns.csv");
    expect(!seg.empty() && seg[0] ==
                               "partition,model_a,model_b,count,ndcg_a_mean,ndcg_a_std,ndcg_b_mean,ndcg_b_std,"
                               "return_a_mean,return_a_std,return_b_mean,return_b_std",
           "segmented_returns.csv header");
    expect(seg.size() >= 2, "segmented_returns.csv has no partitions");

    std::size_t heatmaps = 0, columns = 0;
    for (const auto& e : fs::directory_iterator(rep)) {
        const std::string name = e.path().filename().string();
        const auto l = lines_of(e.path());
        if (name.rfind("heatmap_", 0) == 0) {
            ++heatmaps;
            const auto head = csv::split(l.at(0));
            expect(head.front() == "instrument" && l.size() == head.size(), name + " is not square");
        } else if (name.rfind("column_avg_", 0) == 0) {
            ++columns;
            expect(l.at(0) == "rank,mean_weight,position", name + " header");
            expect(l.size() > 2 * top_m && csv::split(l.at(1)).back() == "short" && csv::split(l.back()).back() == "long",
                   name + " positions");
        }
    }
    expect(heatmaps >= 1 && heatmaps == columns, "heatmap/column_avg groups");

    std::string detail = fmt("%s: 5 tables + %zu heatmap and %zu column-average groups", source.c_str(), heatmaps, columns);
    for (const auto& p : problems) detail += "; bad " + p;
    return {problems.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradient correctness", gradients},
        {"NDCG oracle equivalence", ndcg_oracle},
        {"ListNet contract", listnet_contract},
        {"backtest analytics and no look-ahead", backtest_analytics},
        {"freeze contract", freeze_contract},
        {"synthetic separation vs random scorer", synthetic_separation},
        {"negative transfer direction", negative_transfer},
        {"run-all determinism", determinism},
        {"report fidelity", report_fidelity},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s  %d. %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    fs::remove_all(scratch());
    return failed == 0 ? 0 : 1;
}
