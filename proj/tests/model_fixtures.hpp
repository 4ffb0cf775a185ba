#pragma once

// Straight-line forward passes over plain nested vectors, plus the
// finite-difference sweep shared by the unit and acceptance suites.

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fen/ltr/ranking.hpp"
#include "fen/models/rankers.hpp"
#include "fen/train/trainer.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

namespace fen::testing {

template <class T>
void randomise(T& obj, std::mt19937_64& rng, double scale = 0.6) {
    ParamRefs refs;
    if constexpr (requires { obj.parameters(); }) {
        refs = obj.parameters();
    } else {
        obj.collect(refs, "x", true);
    }
    for (auto& r : refs)
        for (auto& v : r.tensor->storage()) v = scale * (2.0 * ad::unit_uniform(rng) - 1.0);
}

inline Mat linear_oracle(const Mat& x, const Linear& l) { return add_bias(mat_mul(x, to_mat(l.weight)), l.bias); }

inline Mat attention_oracle(const Mat& x, const AttentionParams& p) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(p.d_model()));
    Mat concat(x.size());
    for (std::size_t h = 0; h < p.heads(); ++h) {
        const Mat q = mat_mul(x, to_mat(p.w_query[h]));
        const Mat k = mat_mul(x, to_mat(p.w_key[h]));
        const Mat v = mat_mul(x, to_mat(p.w_value[h]));
        Mat logits = mat_mul(q, transpose(k));
        for (auto& row : logits)
            for (auto& e : row) e *= scale;
        const Mat head = mat_mul(softmax_rows(logits), v);
        concat = h == 0 ? head : concat_cols(concat, head);
    }
    return mat_mul(concat, to_mat(p.w_out));
}

inline Mat encoder_layer_oracle(const Mat& x, const EncoderLayerParams& p) {
    const Mat z = layer_norm(add(x, attention_oracle(x, p.attention)), p.norm_attention.gain,
                             p.norm_attention.bias, ad::kLayerNormEps);
    const Mat ff = linear_oracle(elu(linear_oracle(z, p.ff_in)), p.ff_out);
    return layer_norm(add(z, ff), p.norm_ff.gain, p.norm_ff.bias, ad::kLayerNormEps);
}

inline Mat stack_oracle(const Mat& x, const EncoderStackParams& s) {
    Mat h = linear_oracle(x, s.input_projection);
    for (const auto& l : s.layers) h = encoder_layer_oracle(h, l);
    return h;
}

inline Mat head_oracle(const Mat& x, const RankingHead& head) {
    return linear_oracle(elu(linear_oracle(x, head.hidden)), head.output);
}

/// Max relative error per model over `draws` random parameter and input
/// draws. Dropout is active with a mask that is re-seeded identically for
/// every loss evaluation.
inline std::vector<std::pair<std::string, GradCheckResult>> gradient_check_all_models(int draws, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> bin(0, 4);
    std::vector<std::pair<std::string, GradCheckResult>> out;
    auto record = [&](const std::string& name, const GradCheckResult& r) {
        for (auto& [n, agg] : out) {
            if (n == name) {
                agg.max_rel_error = std::max(agg.max_rel_error, r.max_rel_error);
                agg.checked += r.checked;
                return;
            }
        }
        out.emplace_back(name, r);
    };
    constexpr std::size_t k = 8, ks = 6, n = 5;
    for (int d = 0; d < draws; ++d) {
        Tensor x = random_tensor({n, k}, rng);
        std::vector<int> labels(n);
        for (auto& v : labels) v = bin(rng);
        std::vector<double> targets(n);
        for (auto& v : targets) v = 2.0 * ad::unit_uniform(rng) - 1.0;
        const std::uint64_t mask_seed = rng();

        auto check = [&](const std::string& name, auto& model, bool listnet) {
            const auto res = check_gradients(model.parameters(), [&](ad::Tape& tape) {
                std::mt19937_64 mask_rng(mask_seed);
                Pass p{tape, true, mask_rng};
                auto scores = model.forward(p, x).scores;
                return listnet ? listnet_loss(scores, labels) : mse_loss(scores, targets);
            });
            record(name, res);
        };

        MlpModel mlp(k, 6, 0.3, rng);
        randomise(mlp, rng);
        check("MLP", mlp, false);

        MlpModel ln(k, 6, 0.3, rng);
        randomise(ln, rng);
        check("LN", ln, true);

        const EncoderConfig cfg{k, 4, 5, d % 2 == 0 ? 1u : 2u, 1 + static_cast<std::size_t>(d % 2), 0.2};
        SarModel sar(cfg, 5, rng);
        randomise(sar, rng);
        check("SAR", sar, true);

        SarModel pretrained({ks, 4, 5, 1, 1, 0.2}, 5, rng);
        randomise(pretrained, rng);
        SarModel ps = SarModel::transplant(pretrained, k, rng);
        randomise(ps, rng);
        ps.freeze_stack = true;
        check("SAR+ps frozen", ps, true);
        unfreeze(ps);
        check("SAR+ps unfrozen", ps, true);

        SarModel source({k, 4, 5, 1, 1, 0.2}, 5, rng);
        FusedModel fen(source.stack, cfg, 5, rng);
        randomise(fen, rng);
        check("FEN frozen", fen, true);
        unfreeze(fen);
        check("FEN unfrozen", fen, true);
    }
    return out;
}

}  // namespace fen::testing
