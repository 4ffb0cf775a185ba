#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "fen/core/checkpoint.hpp"
#include "fen/core/tape.hpp"
#include "fen/core/tensor.hpp"

namespace fen {

/// State shared by every op of one forward pass.
struct Pass {
    ad::Tape& tape;
    bool training = false;
    std::mt19937_64& rng;
};

/// Reference to a learnable tensor inside a model.
struct ParamRef {
    std::string name;
    Tensor* tensor = nullptr;
    bool trainable = true;
};

using ParamRefs = std::vector<ParamRef>;

inline std::vector<NamedTensor> snapshot(const ParamRefs& refs) {
    std::vector<NamedTensor> out;
    out.reserve(refs.size());
    for (const auto& r : refs) out.push_back({r.name, *r.tensor});
    return out;
}

/// Copies values into the referenced tensors; names and shapes must match in order.
inline void restore(const ParamRefs& refs, const std::vector<NamedTensor>& values) {
    if (refs.size() != values.size()) {
        throw DataError("checkpoint has " + std::to_string(values.size()) + " tensors, model expects " +
                        std::to_string(refs.size()));
    }
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (refs[i].name != values[i].name) {
            throw DataError("checkpoint entry " + std::to_string(i) + " is '" + values[i].name + "', expected '" +
                            refs[i].name + "'");
        }
        if (refs[i].tensor->shape() != values[i].value.shape()) {
            throw DataError("checkpoint entry '" + refs[i].name + "' has shape " + shape_str(values[i].value.shape()) +
                            ", expected " + shape_str(refs[i].tensor->shape()));
        }
        *refs[i].tensor = values[i].value;
    }
}

// Glorot/Xavier uniform.
inline Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor t = Tensor::matrix(fan_in, fan_out);
    for (auto& v : t.storage()) v = (2.0 * ad::unit_uniform(rng) - 1.0) * limit;
    return t;
}

/// Fully connected layer: x (n x in) -> x W + b (n x out).
struct Linear {
    Tensor weight;
    Tensor bias;

    Linear() = default;
    Linear(std::size_t in, std::size_t out, std::mt19937_64& rng)
        : weight(glorot_uniform(in, out, rng)), bias(Tensor::matrix(1, out)) {}

    std::size_t in_width() const { return weight.rows(); }
    std::size_t out_width() const { return weight.cols(); }

    ad::Var apply(Pass& p, ad::Var x, bool trainable) const {
        return ad::add_bias(ad::matmul(x, p.tape.param(weight, trainable)), p.tape.param(bias, trainable));
    }

    void collect(ParamRefs& out, const std::string& prefix, bool trainable) {
        out.push_back({prefix + ".weight", &weight, trainable});
        out.push_back({prefix + ".bias", &bias, trainable});
    }
};

/// Layer-normalisation gain and bias.
struct LayerNormParams {
    Tensor gain;
    Tensor bias;

    LayerNormParams() = default;
    explicit LayerNormParams(std::size_t width) : gain(Tensor::matrix(1, width, 1.0)), bias(Tensor::matrix(1, width)) {}

    ad::Var apply(Pass& p, ad::Var x, bool trainable) const {
        return ad::layer_norm(x, p.tape.param(gain, trainable), p.tape.param(bias, trainable));
    }

    void collect(ParamRefs& out, const std::string& prefix, bool trainable) {
        out.push_back({prefix + ".gain", &gain, trainable});
        out.push_back({prefix + ".bias", &bias, trainable});
    }
};

/// Scoring head: per-row FC(hidden) -> ELU -> FC(1).
struct RankingHead {
    Linear hidden;
    Linear output;

    RankingHead() = default;
    RankingHead(std::size_t in, std::size_t hidden_width, std::mt19937_64& rng)
        : hidden(in, hidden_width, rng), output(hidden_width, 1, rng) {}

    std::size_t in_width() const { return hidden.in_width(); }

    ad::Var apply(Pass& p, ad::Var features, bool trainable) const {
        return output.apply(p, ad::elu(hidden.apply(p, features, trainable)), trainable);
    }

    void collect(ParamRefs& out, const std::string& prefix, bool trainable) {
        hidden.collect(out, prefix + ".hidden", trainable);
        output.collect(out, prefix + ".output", trainable);
    }
};

}  // namespace fen
