#pragma once

// Ranking-sample CSV: one row per (week, symbol).
//
//   date,symbol,raw_<h>...,norm_<h>...,bin,next_date,next_return,vol,target
//
// Numbers are printed with the shortest round-tripping representation, so
// write -> read reproduces every sample bit-exactly.

#include <map>
#include <string>
#include <vector>

#include "fen/core/error.hpp"
#include "fen/data/csv.hpp"
#include "fen/data/features.hpp"
#include "fen/ltr/sample.hpp"

namespace fen {

inline std::vector<std::string> sample_csv_header(const std::vector<std::string>& feature_names) {
    std::vector<std::string> h{"date", "symbol"};
    h.insert(h.end(), feature_names.begin(), feature_names.end());
    for (const char* c : {"bin", "next_date", "next_return", "vol", "target"}) h.emplace_back(c);
    return h;
}

inline std::string samples_to_csv(const std::vector<RankingSample>& samples,
                                  const std::vector<std::string>& feature_names) {
    std::string out = csv::join(sample_csv_header(feature_names)) + "\n";
    for (const auto& s : samples) {
        if (s.features.cols() != feature_names.size()) throw ShapeError("sample width does not match feature names");
        for (std::size_t i = 0; i < s.size(); ++i) {
            std::vector<std::string> row{s.date.str(), s.ids[i]};
            for (std::size_t j = 0; j < s.features.cols(); ++j) row.push_back(csv::fmt(s.features(i, j)));
            row.push_back(std::to_string(s.labels[i]));
            row.push_back(s.next_date.str());
            row.push_back(csv::fmt(s.next_returns[i]));
            row.push_back(csv::fmt(s.vols[i]));
            row.push_back(csv::fmt(s.targets[i]));
            out += csv::join(row) + "\n";
        }
    }
    return out;
}

/// Parses the sample CSV. Rows for one date must be contiguous.
inline std::vector<RankingSample> samples_from_csv(const std::vector<std::string>& lines,
                                                   std::vector<std::string>* feature_names = nullptr,
                                                   const std::string& source = "samples") {
    if (lines.empty()) throw DataError(source + ": no rows");
    const auto header = csv::split(lines[0]);
    if (header.size() < 8 || header[0] != "date" || header[1] != "symbol") {
        throw DataError(source + ": unexpected header");
    }
    const std::size_t k = header.size() - 7;
    std::vector<std::string> names(header.begin() + 2, header.begin() + 2 + static_cast<long>(k));
    if (sample_csv_header(names) != header) throw DataError(source + ": unexpected header");
    if (feature_names) *feature_names = names;

    std::vector<RankingSample> out;
    std::vector<std::vector<double>> rows;
    auto flush = [&] {
        if (out.empty() || rows.empty()) return;
        auto& s = out.back();
        s.features = Tensor::matrix(rows.size(), k);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < k; ++j) s.features(i, j) = rows[i][j];
        rows.clear();
    };
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (lines[li].empty()) continue;
        const std::string where = source + " line " + std::to_string(li + 1);
        const auto f = csv::split(lines[li]);
        if (f.size() != header.size()) throw DataError(where + ": wrong field count");
        const Date d = Date::parse(f[0]);
        if (out.empty() || out.back().date != d) {
            flush();
            if (!out.empty() && d <= out.back().date) throw DataError(where + ": dates must ascend");
            out.emplace_back();
            out.back().date = d;
            out.back().next_date = Date::parse(f[k + 3]);
        }
        auto& s = out.back();
        s.ids.push_back(f[1]);
        std::vector<double> x(k);
        for (std::size_t j = 0; j < k; ++j) x[j] = csv::parse_double(f[2 + j], where);
        rows.push_back(std::move(x));
        s.labels.push_back(static_cast<int>(csv::parse_double(f[k + 2], where)));
        s.next_returns.push_back(csv::parse_double(f[k + 4], where));
        s.vols.push_back(csv::parse_double(f[k + 5], where));
        s.targets.push_back(csv::parse_double(f[k + 6], where));
    }
    flush();
    return out;
}

}  // namespace fen
