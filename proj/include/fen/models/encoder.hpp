#pragma once

// Self-attention encoder used by every list-aware ranker. No positional
// encoding is applied, so every op here is equivariant under a permutation of
// the instrument rows.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "fen/core/error.hpp"
#include "fen/models/layers.hpp"

namespace fen {

struct EncoderConfig {
    std::size_t input_width = 0;  // k
    std::size_t d_model = 16;
    std::size_t d_ff = 16;
    std::size_t heads = 1;
    std::size_t layers = 1;
    double dropout = 0.0;

    void validate() const {
        if (input_width == 0) throw ConfigError("encoder input width must be positive");
        if (d_model == 0 || d_ff == 0) throw ConfigError("encoder widths must be positive");
        if (layers == 0) throw ConfigError("encoder needs at least one layer");
        if (heads == 0 || d_model % heads != 0) {
            throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by " + std::to_string(heads) +
                              " heads");
        }
        if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
    }
};

struct AttentionParams {
    std::vector<Tensor> w_query;  // per head: d_model x d_head
    std::vector<Tensor> w_key;
    std::vector<Tensor> w_value;
    Tensor w_out;  // (heads * d_head) x d_model

    AttentionParams() = default;
    AttentionParams(std::size_t d_model, std::size_t heads, std::mt19937_64& rng) {
        if (heads == 0 || d_model % heads != 0) throw ConfigError("d_model must be divisible by the head count");
        const std::size_t d_head = d_model / heads;
        for (std::size_t h = 0; h < heads; ++h) {
            w_query.push_back(glorot_uniform(d_model, d_head, rng));
            w_key.push_back(glorot_uniform(d_model, d_head, rng));
            w_value.push_back(glorot_uniform(d_model, d_head, rng));
        }
        w_out = glorot_uniform(heads * d_head, d_model, rng);
    }

    std::size_t heads() const { return w_query.size(); }
    std::size_t d_model() const { return w_out.cols(); }

    void collect(ParamRefs& out, const std::string& prefix, bool trainable) {
        for (std::size_t h = 0; h < heads(); ++h) {
            const auto hp = prefix + ".head" + std::to_string(h);
            out.push_back({hp + ".w_query", &w_query[h], trainable});
            out.push_back({hp + ".w_key", &w_key[h], trainable});
            out.push_back({hp + ".w_value", &w_value[h], trainable});
        }
        out.push_back({prefix + ".w_out", &w_out, trainable});
    }
};

struct AttentionOutput {
    ad::Var output;   // n x d_model
    Tensor weights;   // n x n post-softmax weights, averaged over heads
};

/// Multi-head scaled dot-product self-attention,
/// softmax(Q K^T / sqrt(d_model)) V per head, heads concatenated then W_O.
inline AttentionOutput attention(Pass& p, ad::Var x, const AttentionParams& params, bool trainable) {
    const std::size_t d_model = params.d_model();
    if (x.value().cols() != d_model) {
        throw ShapeError("attention: input width " + std::to_string(x.value().cols()) + " != d_model " +
                         std::to_string(d_model));
    }
    const std::size_t n = x.value().rows();
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d_model));
    Tensor mean_weights = Tensor::matrix(n, n);
    ad::Var concat;
    for (std::size_t h = 0; h < params.heads(); ++h) {
        auto q = ad::matmul(x, p.tape.param(params.w_query[h], trainable));
        auto k = ad::matmul(x, p.tape.param(params.w_key[h], trainable));
        auto v = ad::matmul(x, p.tape.param(params.w_value[h], trainable));
        auto w = ad::softmax_rows(ad::scale(ad::matmul(q, ad::transpose(k)), inv_sqrt));
        for (std::size_t i = 0; i < mean_weights.size(); ++i) {
            mean_weights[i] += w.value()[i] / static_cast<double>(params.heads());
        }
        auto head = ad::matmul(w, v);
        concat = h == 0 ? head : ad::concat_cols(concat, head);
    }
    return {ad::matmul(concat, p.tape.param(params.w_out, trainable)), std::move(mean_weights)};
}

struct EncoderLayerParams {
    AttentionParams attention;
    Linear ff_in;   // d_model x d_ff
    Linear ff_out;  // d_ff x d_model
    LayerNormParams norm_attention;
    LayerNormParams norm_ff;
    double dropout = 0.0;

    EncoderLayerParams() = default;
    EncoderLayerParams(const EncoderConfig& cfg, std::mt19937_64& rng)
        : attention(cfg.d_model, cfg.heads, rng),
          ff_in(cfg.d_model, cfg.d_ff, rng),
          ff_out(cfg.d_ff, cfg.d_model, rng),
          norm_attention(cfg.d_model),
          norm_ff(cfg.d_model),
          dropout(cfg.dropout) {}

    void collect(ParamRefs& out, const std::string& prefix, bool trainable) {
        attention.collect(out, prefix + ".attention", trainable);
        ff_in.collect(out, prefix + ".ff_in", trainable);
        ff_out.collect(out, prefix + ".ff_out", trainable);
        norm_attention.collect(out, prefix + ".norm_attention", trainable);
        norm_ff.collect(out, prefix + ".norm_ff", trainable);
    }
};

struct EncoderLayerOutput {
    ad::Var output;
    Tensor attention_weights;
};

/// z = LN(x + drop(MHA(x))); out = LN(z + drop(FF(z))) with FF = FC -> ELU -> FC.
inline EncoderLayerOutput encoder_layer(Pass& p, ad::Var x, const EncoderLayerParams& params, bool trainable) {
    auto att = attention(p, x, params.attention, trainable);
    auto z = params.norm_attention.apply(
        p, ad::add(x, ad::dropout(att.output, params.dropout, p.training, p.rng)), trainable);
    auto ff = params.ff_out.apply(p, ad::elu(params.ff_in.apply(p, z, trainable)), trainable);
    auto out = params.norm_ff.apply(p, ad::add(z, ad::dropout(ff, params.dropout, p.training, p.rng)), trainable);
    return {out, std::move(att.weights)};
}

struct EncoderStackParams {
    Linear input_projection;  // k x d_model
    std::vector<EncoderLayerParams> layers;

    EncoderStackParams() = default;
    EncoderStackParams(const EncoderConfig& cfg, std::mt19937_64& rng) {
        cfg.validate();
        input_projection = Linear(cfg.input_width, cfg.d_model, rng);
        for (std::size_t i = 0; i < cfg.layers; ++i) layers.emplace_back(cfg, rng);
    }

    std::size_t input_width() const { return input_projection.in_width(); }
    std::size_t d_model() const { return input_projection.out_width(); }

    void collect(ParamRefs& out, const std::string& prefix, bool trainable) {
        input_projection.collect(out, prefix + ".input_projection", trainable);
        for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(out, prefix + ".layer" + std::to_string(i), trainable);
    }
};

struct EncoderStackOutput {
    ad::Var output;                // n x d_model
    Tensor last_attention;         // n x n, from the final layer
};

inline EncoderStackOutput encoder_stack(Pass& p, ad::Var x, const EncoderStackParams& params, bool trainable) {
    if (params.layers.empty()) throw ConfigError("encoder stack has no layers");
    if (x.value().cols() != params.input_width()) {
        throw ShapeError("encoder stack expects " + std::to_string(params.input_width()) + " input columns, got " +
                         std::to_string(x.value().cols()));
    }
    auto h = params.input_projection.apply(p, x, trainable);
    Tensor weights;
    for (const auto& layer : params.layers) {
        auto out = encoder_layer(p, h, layer, trainable);
        h = out.output;
        weights = std::move(out.attention_weights);
    }
    return {h, std::move(weights)};
}

}  // namespace fen
