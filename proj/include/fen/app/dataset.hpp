#pragma once

// Synthetic target/source/index CSVs plus a ready-to-run config.

#include <filesystem>
#include <string>

#include "fen/app/config.hpp"
#include "fen/app/synthetic.hpp"

namespace fen {

struct SyntheticDataset {
    std::string out = "synthetic";
    std::uint64_t seed = 0;
    std::size_t target_weeks = 300;
    std::size_t source_weeks = 650;
    std::size_t target_n = 10;
    std::size_t source_n = 30;
};

// Writes a target panel (every calendar day, weekly anchor Sunday), a
// weekday source panel, a risk index and a config that ties them together.
inline void write_synthetic_dataset(const SyntheticDataset& o) {
    namespace fs = std::filesystem;
    fs::create_directories(o.out);
    SyntheticMarket target{synthetic_symbols("T", o.target_n), Date::from_ymd(2015, 1, 5), o.target_weeks, false};
    target.seed = o.seed * 3 + 1;
    SyntheticMarket source{synthetic_symbols("S", o.source_n), Date::from_ymd(2008, 1, 7), o.source_weeks, true};
    source.seed = o.seed * 3 + 2;
    const auto tp = generate_market(target);
    const auto sp = generate_market(source);
    csv::write_file((fs::path(o.out) / "target.csv").string(), prices_to_csv(tp));
    csv::write_file((fs::path(o.out) / "source.csv").string(), prices_to_csv(sp));
    csv::write_file((fs::path(o.out) / "index.csv").string(),
                    index_to_csv(generate_index(tp.dates.front(), tp.dates.back(), o.seed * 3 + 3)));

    const int last = tp.dates.back().year() - (static_cast<unsigned>(tp.dates.back().ymd().month()) < 6 ? 1 : 0);
    Json cfg = {
        {"output_dir", "out"},
        {"target", {{"prices", "target.csv"}, {"anchor_weekday", 7}}},
        {"source", {{"prices", "source.csv"}, {"anchor_weekday", 5}}},
        {"index_prices", "index.csv"},
        {"first_test_year", last - 1},
        {"last_test_year", last},
        {"seed", o.seed},
        {"training", {{"max_epochs", 20}, {"patience", 5}}},
        {"finetune", {{"max_epochs", 10}, {"patience", 3}}},
        {"selection", {{"take", 2}, {"candidates", 4}}},
    };
    csv::write_file((fs::path(o.out) / "config.json").string(), cfg.dump(2) + "\n");
}

}  // namespace fen
