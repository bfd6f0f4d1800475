#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "loyalty/data/encoded.hpp"
#include "loyalty/model/classifier.hpp"
#include "loyalty/rng.hpp"

namespace loyalty::compress {

enum class LossChoice { cross_entropy, kd, kd_ce };

std::string to_string(LossChoice c);
/// Accepts "ce", "cross-entropy", "kd" and "kd+ce".
LossChoice parse_loss_choice(const std::string& s);

/// Teacher outputs on a fixed example list, computed once and reused by every
/// epoch of a distillation run.
struct TeacherSignals {
    std::vector<std::vector<double>> logits;
    /// Per example, per teacher layer: the unit-length [cls] hidden state.
    std::vector<std::vector<std::vector<double>>> cls_hidden;

    bool has_hidden() const { return !cls_hidden.empty(); }
};

TeacherSignals teacher_signals(const model::ClassifierModel& teacher,
                               std::span<const data::EncodedExample> examples, bool with_hidden);

struct TrainOptions {
    std::size_t epochs = 3;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    double warmup_fraction = 0.1;
    double weight_decay = 0.01;
    double clip_norm = 1.0;
    LossChoice loss = LossChoice::cross_entropy;
    double temperature = 10.0;
    /// Weight of the KD term under kd+ce; cross-entropy gets 1 - alpha.
    double alpha = 0.7;
    /// Weight of the hidden-state term; 0 disables it.
    double beta = 0.0;
    /// Teacher layer index matched by each student layer when beta > 0.
    std::vector<std::size_t> layer_map;
    /// Train through quantize-dequantize of every linear layer.
    bool fake_quant = false;

    /// Throws InvalidConfig for non-positive batch size or learning rate and
    /// out-of-range mixing weights.
    void validate() const;
};

struct EpochStats {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> epochs;
    std::size_t steps = 0;
};

/// Per-example forward pass used by the generic loop.
using ForwardFn = std::function<model::ForwardResult(nn::Tape&, std::span<const model::TokenId>)>;
/// Invoked before each optimizer step with the global step index.
using StepHook = std::function<void(std::size_t step)>;

/// Mini-batch Adam with linear warm-up/decay over `params`. Examples are
/// reshuffled each epoch from `rng`. `teacher` must cover `examples` when the
/// loss uses KD or a hidden-state term.
TrainResult train_loop(std::vector<nn::Parameter*> params, const ForwardFn& forward_fn,
                       const StepHook& on_step, std::span<const data::EncodedExample> examples,
                       const TeacherSignals* teacher, const TrainOptions& options, Rng& rng);

/// Trains every float parameter of `model`. A model carrying int8 weights
/// trains its float master weights through fake quantization; the int8 copies
/// are left for the caller to refresh with requantize(). Throws InvalidConfig
/// for models whose int8 weights are final.
TrainResult train(model::ClassifierModel& model, std::span<const data::EncodedExample> examples,
                  const TeacherSignals* teacher, const TrainOptions& options, Rng& rng);

/// Mean loss of `model` under `options`' loss on `examples` (no training).
double evaluate_loss(const model::ClassifierModel& model,
                     std::span<const data::EncodedExample> examples, const TeacherSignals* teacher,
                     const TrainOptions& options);

/// Parameters of one transformer layer in a fixed order.
std::vector<nn::Parameter*> layer_parameters(model::TransformerLayer& layer);

}  // namespace loyalty::compress
