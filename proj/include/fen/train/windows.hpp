#pragma once

// Expanding one-year windows. For test year t the model trains on every
// sample whose label is realised before 1 January of t, keeps the
// chronologically last 10% of those for validation, and is tested on the
// rebalances dated inside t.

#include <span>
#include <string>
#include <vector>

#include "fen/core/error.hpp"
#include "fen/data/date.hpp"
#include "fen/ltr/sample.hpp"

namespace fen {

struct Fold {
    int test_year = 0;
    std::vector<std::size_t> train;       // indices into the sample sequence
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
};

struct WindowPlan {
    std::vector<Fold> folds;
};

/// Validation share of a block of n training weeks: the last 10%, at least one.
inline std::size_t validation_size(std::size_t n) {
    if (n < 2) throw DataError("need at least 2 training weeks to carve out a validation block, got " + std::to_string(n));
    return std::max<std::size_t>(1, (n + 5) / 10);
}

/// `dates[i]` is the rebalance date of sample i and `label_dates[i]` the date
/// its label is realised on (the next rebalance). Dates must ascend.
inline WindowPlan plan_windows(std::span<const Date> dates, std::span<const Date> label_dates, int first_test_year,
                               int last_test_year) {
    if (dates.size() != label_dates.size()) throw ShapeError("plan_windows: dates and label dates differ in length");
    if (dates.empty()) throw DataError("plan_windows: no samples");
    if (last_test_year < first_test_year) {
        throw ConfigError("last test year " + std::to_string(last_test_year) + " precedes first test year " +
                          std::to_string(first_test_year));
    }
    for (std::size_t i = 1; i < dates.size(); ++i) {
        if (!(dates[i - 1] < dates[i])) throw DataError("plan_windows: dates must be strictly ascending");
    }
    if (dates.front().year() > first_test_year - 2) {
        throw DataError("insufficient history: data starts in " + std::to_string(dates.front().year()) +
                        " but test year " + std::to_string(first_test_year) + " needs two prior years");
    }
    WindowPlan plan;
    for (int year = first_test_year; year <= last_test_year; ++year) {
        const Date cutoff = Date::from_ymd(year, 1, 1);
        Fold f;
        f.test_year = year;
        std::vector<std::size_t> fit;
        for (std::size_t i = 0; i < dates.size(); ++i) {
            if (label_dates[i] < cutoff) fit.push_back(i);
            if (dates[i].year() == year) f.test.push_back(i);
        }
        if (f.test.empty()) throw DataError("no rebalance dates in test year " + std::to_string(year));
        const std::size_t n_val = validation_size(fit.size());
        f.train.assign(fit.begin(), fit.end() - static_cast<long>(n_val));
        f.validation.assign(fit.end() - static_cast<long>(n_val), fit.end());
        plan.folds.push_back(std::move(f));
    }
    return plan;
}

/// Dates-only form: the label of rebalance i is realised at rebalance i+1, so
/// the final date never trains.
inline WindowPlan plan_windows(std::span<const Date> dates, int first_test_year, int last_test_year) {
    if (dates.empty()) throw DataError("plan_windows: no samples");
    std::vector<Date> labels(dates.begin() + 1, dates.end());
    labels.push_back(Date::from_ymd(9999, 12, 31));
    return plan_windows(dates, labels, first_test_year, last_test_year);
}

inline WindowPlan plan_windows(std::span<const RankingSample> samples, int first_test_year, int last_test_year) {
    std::vector<Date> d, l;
    for (const auto& s : samples) {
        d.push_back(s.date);
        l.push_back(s.next_date);
    }
    return plan_windows(d, l, first_test_year, last_test_year);
}

template <class T>
std::vector<T> gather(std::span<const T> items, const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(items[i]);
    return out;
}

}  // namespace fen
