#pragma once

#include <span>
#include <string>
#include <vector>

#include "loyalty/compress/trainer.hpp"
#include "loyalty/data/encoded.hpp"
#include "loyalty/model/classifier.hpp"

namespace loyalty::compress {

/// Gives every linear layer int8 weights (symmetric per-tensor scale) and
/// records the largest input magnitude each layer sees on `calibration`.
/// Activations are quantized per forward call at inference; embeddings and
/// layer norms stay float. Layers that already hold int8 weights are kept.
/// All-zero weight tensors get scale 1 and a warning (logged and appended to
/// `warnings` when given). Throws InvalidInput for an empty calibration set.
model::ClassifierModel quantize_ptq(const model::ClassifierModel& model,
                                    std::span<const data::EncodedExample> calibration,
                                    bool final_precision = false,
                                    std::vector<std::string>* warnings = nullptr);

/// Re-derives the int8 weights of a quantized model from its float master
/// weights, e.g. after training through fake quantization.
model::ClassifierModel requantize(const model::ClassifierModel& model,
                                  std::span<const data::EncodedExample> calibration);

/// Quantization-aware training: quantizes `init`, trains its master weights
/// through quantize-dequantize with straight-through gradients, then exports
/// int8 weights exactly as quantize_ptq does. KD losses need `teacher`
/// (InvalidConfig otherwise). With 0 epochs the result equals quantize_ptq.
model::ClassifierModel train_qat(const model::ClassifierModel& init,
                                 std::span<const data::EncodedExample> train_set,
                                 std::span<const data::EncodedExample> calibration,
                                 const TeacherSignals* teacher, const TrainOptions& options,
                                 Rng& rng, TrainResult* stats = nullptr);

}  // namespace loyalty::compress
