#pragma once

// Minibatch Adam with early stopping on validation loss. Works with any model
// exposing `forward(Pass&, const Tensor&) -> ModelOutput` and
// `parameters() -> ParamRefs`.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fen/core/adam.hpp"
#include "fen/core/error.hpp"
#include "fen/ltr/ranking.hpp"
#include "fen/ltr/sample.hpp"
#include "fen/models/rankers.hpp"

namespace fen {

enum class LossKind { ListNet, Mse };

inline const char* loss_name(LossKind k) { return k == LossKind::ListNet ? "listnet" : "mse"; }

struct TrainConfig {
    std::size_t max_epochs = 100;
    std::size_t patience = 25;
    std::size_t batch_size = 8;  // lists per minibatch
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    LossKind loss = LossKind::ListNet;

    void validate() const {
        if (batch_size == 0) throw ConfigError("batch size must be positive");
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be positive");
    }
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double validation_loss = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;  // 0 when no epoch ran
    double best_validation_loss = std::numeric_limits<double>::infinity();
    std::size_t optimizer_steps = 0;
    bool stopped_early = false;
};

/// Called after every optimizer step with the running step count.
using StepHook = std::function<void(std::size_t)>;

inline ad::Var list_loss(ad::Var scores, const RankingSample& s, LossKind kind) {
    return kind == LossKind::ListNet ? listnet_loss(scores, s.labels) : mse_loss(scores, s.targets);
}

/// Mean per-list loss in evaluation mode.
template <class Model>
double evaluate_loss(const Model& model, std::span<const RankingSample> samples, LossKind kind) {
    if (samples.empty()) throw DataError("cannot evaluate loss on an empty sample set");
    double total = 0.0;
    std::mt19937_64 rng(0);
    for (const auto& s : samples) {
        ad::Tape tape;
        Pass p{tape, false, rng};
        total += list_loss(model.forward(p, s.features).scores, s, kind).value().item();
    }
    return total / static_cast<double>(samples.size());
}

template <class Model>
TrainHistory train_model(Model& model, std::span<const RankingSample> train, std::span<const RankingSample> validation,
                         const TrainConfig& cfg, const StepHook& on_step = {}) {
    cfg.validate();
    if (train.empty()) throw DataError("training needs at least one training sample");
    if (validation.empty()) throw DataError("training needs at least one validation sample");

    ParamRefs refs = model.parameters();
    std::vector<Tensor*> trainable;
    for (const auto& r : refs) {
        if (r.trainable) trainable.push_back(r.tensor);
    }
    if (trainable.empty()) throw ConfigError("model has no trainable parameters");

    TrainHistory hist;
    std::vector<NamedTensor> best = snapshot(refs);
    AdamState adam;
    const AdamConfig acfg{cfg.learning_rate};
    std::mt19937_64 order_rng(cfg.seed);
    std::mt19937_64 dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t wait = 0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), order_rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            ad::Tape tape;
            Pass p{tape, true, dropout_rng};
            ad::Var total;
            for (std::size_t b = start; b < end; ++b) {
                const auto& s = train[order[b]];
                auto l = list_loss(model.forward(p, s.features).scores, s, cfg.loss);
                total = b == start ? l : ad::add(total, l);
            }
            auto loss = ad::scale(total, 1.0 / static_cast<double>(end - start));
            const double lv = loss.value().item();
            if (!std::isfinite(lv)) {
                throw DivergenceError("non-finite training loss (" + std::to_string(lv) + ") at epoch " +
                                      std::to_string(epoch) + ", batch " + std::to_string(batches + 1) +
                                      ", learning rate " + std::to_string(cfg.learning_rate));
            }
            tape.backward(loss);
            std::vector<const Tensor*> grads;
            grads.reserve(trainable.size());
            for (Tensor* t : trainable) grads.push_back(tape.grad(*t));
            adam_step(trainable, grads, adam, acfg);
            ++hist.optimizer_steps;
            if (on_step) on_step(hist.optimizer_steps);
            epoch_loss += lv;
            ++batches;
        }
        const double val = evaluate_loss(model, validation, cfg.loss);
        if (!std::isfinite(val)) {
            throw DivergenceError("non-finite validation loss at epoch " + std::to_string(epoch));
        }
        hist.epochs.push_back({epoch, epoch_loss / static_cast<double>(batches), val});
        if (val < hist.best_validation_loss) {
            hist.best_validation_loss = val;
            hist.best_epoch = epoch;
            best = snapshot(refs);
            wait = 0;
        } else {
            ++wait;
        }
        if (epoch > 1 && wait >= cfg.patience) {
            hist.stopped_early = epoch < cfg.max_epochs;
            break;
        }
    }
    restore(refs, best);
    return hist;
}

inline constexpr double kFinetuneLearningRate = 1e-6;

struct FinetuneConfig {
    std::size_t max_epochs = 100;
    std::size_t patience = 10;
    std::size_t batch_size = 8;
    std::uint64_t seed = 0;
    LossKind loss = LossKind::ListNet;
};

inline void unfreeze(FusedModel& m) { m.freeze_source = false; }
inline void unfreeze(SarModel& m) { m.freeze_stack = false; }

/// Whole-network retraining at the smallest learning rate of the search grid.
template <class Model>
TrainHistory finetune(Model& model, std::span<const RankingSample> train, std::span<const RankingSample> validation,
                      const FinetuneConfig& cfg, const StepHook& on_step = {}) {
    unfreeze(model);
    TrainConfig tc;
    tc.max_epochs = cfg.max_epochs;
    tc.patience = cfg.patience;
    tc.batch_size = cfg.batch_size;
    tc.learning_rate = kFinetuneLearningRate;
    tc.seed = cfg.seed;
    tc.loss = cfg.loss;
    return train_model(model, train, validation, tc, on_step);
}

}  // namespace fen
