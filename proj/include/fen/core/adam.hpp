#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "fen/core/error.hpp"
#include "fen/core/tensor.hpp"

namespace fen {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::int64_t step = 0;
};

/// One Adam update with bias correction. A null gradient leaves the matching
/// parameter and its moments untouched (frozen parameters stay bit-identical).
inline void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, AdamState& state,
                      const AdamConfig& cfg) {
    if (params.size() != grads.size()) throw ShapeError("adam_step: parameter and gradient counts differ");
    if (state.m.empty()) {
        for (const Tensor* p : params) {
            state.m.emplace_back(p->shape(), 0.0);
            state.v.emplace_back(p->shape(), 0.0);
        }
    }
    if (state.m.size() != params.size()) throw ShapeError("adam_step: optimizer state does not match parameters");
    ++state.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor* g = grads[i];
        if (g == nullptr) continue;
        Tensor& p = *params[i];
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        if (g->shape() != p.shape() || m.shape() != p.shape()) {
            throw ShapeError("adam_step: shape mismatch for parameter " + std::to_string(i) + ": " +
                             shape_str(p.shape()) + " vs gradient " + shape_str(g->shape()));
        }
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double gj = (*g)[j];
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
            const double mhat = m[j] / c1;
            const double vhat = v[j] / c2;
            p[j] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

}  // namespace fen
