#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "loyalty/compress/trainer.hpp"
#include "loyalty/data/encoded.hpp"
#include "loyalty/model/classifier.hpp"

namespace loyalty::compress {

enum class DistillVariant { pure, patient };

struct DistillOptions {
    DistillVariant variant = DistillVariant::pure;
    double temperature = 10.0;
    /// 1 gives the pure KD loss; below 1 mixes in cross-entropy.
    double alpha = 1.0;
    /// Hidden-state weight of the patient variant.
    double beta = 500.0;
    TrainOptions train;
};

/// Student layer i (0-based) matches teacher layer (i + 1) * (Lt / Ls) - 1.
/// Throws InvalidConfig unless 0 < Ls <= Lt and Ls divides Lt.
std::vector<std::size_t> skip_layer_map(std::size_t teacher_layers, std::size_t student_layers);

/// Trains `student_init` against the teacher outputs in `signals` (computed
/// on `train_set`). The patient variant also matches unit-length [cls]
/// hidden states along the skip mapping.
model::ClassifierModel distill(const model::ClassifierModel& teacher,
                               const model::ClassifierModel& student_init,
                               std::span<const data::EncodedExample> train_set,
                               const TeacherSignals& signals, const DistillOptions& options,
                               Rng& rng, TrainResult* stats = nullptr);

/// The training options distill() runs with.
TrainOptions distill_train_options(const model::ClassifierModel& teacher,
                                   const model::ClassifierModel& student,
                                   const DistillOptions& options);

}  // namespace loyalty::compress
