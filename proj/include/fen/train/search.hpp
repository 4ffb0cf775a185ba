#pragma once

// Uniform random search over discrete hyperparameter grids.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "fen/core/error.hpp"

namespace fen {

struct HyperParams {
    double dropout = 0.0;
    std::size_t hidden_width = 16;  // scoring-head (or MLP) hidden width
    std::size_t batch_size = 8;
    double learning_rate = 1e-3;
    std::size_t d_model = 16;  // encoder width after the input projection
    std::size_t d_ff = 16;
    std::size_t layers = 1;
    std::size_t heads = 1;

    bool operator==(const HyperParams&) const = default;
};

/// One grid per hyperparameter. Dimensions a model does not use hold a single value.
struct SearchSpace {
    std::vector<double> dropout{0.0};
    std::vector<std::size_t> hidden_width{16};
    std::vector<std::size_t> batch_size{8};
    std::vector<double> learning_rate{1e-3};
    std::vector<std::size_t> d_model{16};
    std::vector<std::size_t> d_ff{16};
    std::vector<std::size_t> layers{1};
    std::vector<std::size_t> heads{1};

    std::size_t grid_size() const {
        return dropout.size() * hidden_width.size() * batch_size.size() * learning_rate.size() * d_model.size() *
               d_ff.size() * layers.size() * heads.size();
    }

    void validate() const {
        if (grid_size() == 0) throw ConfigError("search space has an empty dimension");
    }
};

inline SearchSpace mlp_search_space() {
    SearchSpace s;
    s.dropout = {0.0, 0.2, 0.4, 0.6, 0.8};
    s.hidden_width = {8, 16, 32, 64, 128};
    s.batch_size = {8, 16, 32, 64, 128};
    s.learning_rate = {1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
    return s;
}

inline SearchSpace listnet_search_space() {
    SearchSpace s;
    s.dropout = {0.0, 0.2, 0.4, 0.6, 0.8};
    s.hidden_width = {8, 16, 32, 64, 128};
    s.batch_size = {1, 2, 4, 8, 16};
    s.learning_rate = {1e-6, 1e-5, 1e-4, 1e-3};
    return s;
}

/// Shared by SAR, SAR+ps, the source model and the fused network.
inline SearchSpace encoder_search_space() {
    SearchSpace s;
    s.d_model = {8, 16, 32, 64, 128};
    s.d_ff = {8, 16, 32, 64, 128};
    s.dropout = {0.0, 0.2, 0.4, 0.6, 0.8};
    s.hidden_width = {16, 32, 64, 128, 256};
    s.batch_size = {2, 4, 6, 8, 10};
    s.learning_rate = {1e-6, 1e-5, 1e-4, 1e-3};
    s.layers = {1, 2, 3, 4};
    s.heads = {1};
    return s;
}

inline const std::vector<std::size_t>& finetune_batch_sizes() {
    static const std::vector<std::size_t> sizes{2, 4, 6, 8, 10};
    return sizes;
}

template <class T>
const T& pick(const std::vector<T>& grid, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> d(0, grid.size() - 1);
    return grid[d(rng)];
}

/// Independent uniform draw per dimension, hence uniform over the full grid.
inline HyperParams sample_params(const SearchSpace& space, std::mt19937_64& rng) {
    space.validate();
    HyperParams h;
    h.dropout = pick(space.dropout, rng);
    h.hidden_width = pick(space.hidden_width, rng);
    h.batch_size = pick(space.batch_size, rng);
    h.learning_rate = pick(space.learning_rate, rng);
    h.d_model = pick(space.d_model, rng);
    h.d_ff = pick(space.d_ff, rng);
    h.layers = pick(space.layers, rng);
    h.heads = pick(space.heads, rng);
    return h;
}

struct SearchTrial {
    HyperParams params;
    double loss = 0.0;
};

struct SearchResult {
    HyperParams best;
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t best_iteration = 0;  // 0-based
    std::vector<SearchTrial> trials;
};

/// `objective` returns the final validation loss of a configuration. NaN
/// losses never win; ties keep the earliest iteration.
inline SearchResult hyper_search(const SearchSpace& space, std::size_t iterations, std::uint64_t seed,
                                 const std::function<double(const HyperParams&)>& objective) {
    space.validate();
    if (iterations == 0) throw ConfigError("hyperparameter search needs at least one iteration");
    std::mt19937_64 rng(seed);
    SearchResult res;
    for (std::size_t it = 0; it < iterations; ++it) {
        const HyperParams h = sample_params(space, rng);
        const double loss = objective(h);
        res.trials.push_back({h, loss});
        const bool first = it == 0;
        if (first || (!std::isnan(loss) && (std::isnan(res.best_loss) || loss < res.best_loss))) {
            res.best = h;
            res.best_loss = loss;
            res.best_iteration = it;
        }
    }
    return res;
}

}  // namespace fen
