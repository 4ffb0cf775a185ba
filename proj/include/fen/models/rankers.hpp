#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fen/core/error.hpp"
#include "fen/models/encoder.hpp"
#include "fen/models/layers.hpp"

namespace fen {

/// Scores (n x 1 on the tape) plus the last-layer attention of the list-aware
/// part of the model (empty for pointwise models).
struct ModelOutput {
    ad::Var scores;
    Tensor attention;
    Tensor source_attention;  // fused model only: last source-stack layer
};

inline std::vector<double> score_values(const ModelOutput& out) {
    const auto v = out.scores.value().values();
    return {v.begin(), v.end()};
}

/// Fused encoder network: a pre-trained source stack and a target stack run
/// in parallel over the same list; their per-row outputs are concatenated and
/// scored by a small head. When the target feature width differs from the
/// source's, a trainable bridge maps target features into the source width.
struct FusedModel {
    EncoderStackParams source;
    EncoderStackParams target;
    std::optional<Linear> bridge;
    RankingHead head;
    bool freeze_source = true;

    FusedModel() = default;
    FusedModel(EncoderStackParams pretrained_source, const EncoderConfig& target_cfg, std::size_t head_hidden,
               std::mt19937_64& rng)
        : source(std::move(pretrained_source)), target(target_cfg, rng) {
        if (target_cfg.input_width != source.input_width()) bridge = Linear(target_cfg.input_width, source.input_width(), rng);
        head = RankingHead(source.d_model() + target.d_model(), head_hidden, rng);
    }

    std::size_t input_width() const { return target.input_width(); }

    void validate() const {
        const bool widths_differ = target.input_width() != source.input_width();
        if (widths_differ && !bridge) {
            throw ConfigError("fused model: target width " + std::to_string(target.input_width()) +
                              " differs from source width " + std::to_string(source.input_width()) +
                              " but no bridge layer is configured");
        }
        if (!widths_differ && bridge) throw ConfigError("fused model: bridge configured but feature widths agree");
        if (bridge && (bridge->in_width() != target.input_width() || bridge->out_width() != source.input_width())) {
            throw ConfigError("fused model: bridge shape does not map target width to source width");
        }
        if (head.in_width() != source.d_model() + target.d_model()) {
            throw ConfigError("fused model: head width does not match concatenated encoder outputs");
        }
    }

    ModelOutput forward(Pass& p, const Tensor& x) const {
        validate();
        if (x.cols() != input_width()) {
            throw ShapeError("fused model expects " + std::to_string(input_width()) + " features, got " +
                             std::to_string(x.cols()));
        }
        auto in = p.tape.constant(x);
        auto source_in = bridge ? bridge->apply(p, in, true) : in;
        auto src = encoder_stack(p, source_in, source, !freeze_source);
        auto tgt = encoder_stack(p, in, target, true);
        auto scores = head.apply(p, ad::concat_cols(src.output, tgt.output), true);
        return {scores, std::move(tgt.last_attention), std::move(src.last_attention)};
    }

    ParamRefs parameters() {
        ParamRefs out;
        source.collect(out, "source", !freeze_source);
        target.collect(out, "target", true);
        if (bridge) bridge->collect(out, "bridge", true);
        head.collect(out, "head", true);
        return out;
    }

    ParamRefs source_parameters() {
        ParamRefs out;
        source.collect(out, "source", !freeze_source);
        return out;
    }
};

/// Self-attention ranker: encoder stack then a per-row scoring head. With a
/// bridge and a transplanted stack it is the parameter-sharing variant.
struct SarModel {
    std::optional<Linear> bridge;
    EncoderStackParams stack;
    RankingHead head;
    bool freeze_stack = false;

    SarModel() = default;
    SarModel(const EncoderConfig& cfg, std::size_t head_hidden, std::mt19937_64& rng)
        : stack(cfg, rng), head(cfg.d_model, head_hidden, rng) {}

    /// Parameter-sharing construction: reuse a pre-trained stack and head,
    /// adding a bridge when the feature widths differ.
    static SarModel transplant(const SarModel& pretrained, std::size_t target_width, std::mt19937_64& rng) {
        SarModel m;
        m.stack = pretrained.stack;
        m.head = pretrained.head;
        if (pretrained.bridge) throw ConfigError("cannot transplant a model that already has a bridge");
        if (target_width != m.stack.input_width()) m.bridge = Linear(target_width, m.stack.input_width(), rng);
        return m;
    }

    std::size_t input_width() const { return bridge ? bridge->in_width() : stack.input_width(); }

    ModelOutput forward(Pass& p, const Tensor& x) const {
        if (x.cols() != input_width()) {
            throw ShapeError("SAR expects " + std::to_string(input_width()) + " features, got " +
                             std::to_string(x.cols()));
        }
        auto in = p.tape.constant(x);
        if (bridge) in = bridge->apply(p, in, true);
        auto enc = encoder_stack(p, in, stack, !freeze_stack);
        return {head.apply(p, enc.output, true), std::move(enc.last_attention)};
    }

    ParamRefs parameters() {
        ParamRefs out;
        if (bridge) bridge->collect(out, "bridge", true);
        stack.collect(out, "stack", !freeze_stack);
        head.collect(out, "head", true);
        return out;
    }
};

/// Pointwise multi-layer perceptron: FC -> ELU -> dropout -> FC(1) per row.
struct MlpModel {
    Linear hidden;
    Linear output;
    double dropout = 0.0;

    MlpModel() = default;
    MlpModel(std::size_t input_width, std::size_t hidden_width, double dropout_rate, std::mt19937_64& rng)
        : hidden(input_width, hidden_width, rng), output(hidden_width, 1, rng), dropout(dropout_rate) {
        if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
    }

    std::size_t input_width() const { return hidden.in_width(); }

    ModelOutput forward(Pass& p, const Tensor& x) const {
        if (x.cols() != input_width()) {
            throw ShapeError("MLP expects " + std::to_string(input_width()) + " features, got " +
                             std::to_string(x.cols()));
        }
        auto h = ad::dropout(ad::elu(hidden.apply(p, p.tape.constant(x), true)), dropout, p.training, p.rng);
        return {output.apply(p, h, true), Tensor()};
    }

    ParamRefs parameters() {
        ParamRefs out;
        hidden.collect(out, "hidden", true);
        output.collect(out, "output", true);
        return out;
    }
};

/// Evaluation-mode scores of any model.
template <class Model>
std::vector<double> predict(const Model& model, const Tensor& x, Tensor* attention = nullptr,
                            Tensor* source_attention = nullptr) {
    ad::Tape tape;
    std::mt19937_64 rng(0);
    Pass p{tape, false, rng};
    auto out = model.forward(p, x);
    if (attention) *attention = std::move(out.attention);
    if (source_attention) *source_attention = std::move(out.source_attention);
    return score_values(out);
}

/// Heuristic one-week momentum: the score is the previous week's
/// volatility-normalised return, read straight from the feature matrix.
inline std::vector<double> one_week_return_signal(const Tensor& features, std::size_t column) {
    if (column >= features.cols()) {
        throw DataError("one-week return feature column " + std::to_string(column) + " missing (only " +
                        std::to_string(features.cols()) + " columns)");
    }
    std::vector<double> out(features.rows());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = features(i, column);
    return out;
}

}  // namespace fen
