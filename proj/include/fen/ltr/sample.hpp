#pragma once

#include <string>
#include <vector>

#include "fen/core/tensor.hpp"
#include "fen/data/date.hpp"

namespace fen {

/// One rebalance date: the feature list for every instrument plus everything
/// realised over the following week. Rows of every member are aligned.
struct RankingSample {
    Date date;       // rebalance week end t
    Date next_date;  // week end t+1; labels depend on data up to here
    std::vector<std::string> ids;
    Tensor features;                 // n x k, information up to t
    std::vector<int> labels;         // quintile bins of next_returns, 0 = lowest
    std::vector<double> next_returns;  // simple return over t -> t+1
    std::vector<double> vols;          // annualised ex-ante volatility at t
    std::vector<double> targets;       // regression target: next return / weekly vol

    std::size_t size() const { return ids.size(); }
};

}  // namespace fen
