#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "loyalty/compress/trainer.hpp"
#include "loyalty/data/encoded.hpp"
#include "loyalty/model/classifier.hpp"
#include "loyalty/rng.hpp"

namespace loyalty::compress {

/// Linear replacement curriculum p(t) = min(1, b + k t).
struct ReplacementSchedule {
    double b = 0.5;
    double k = 0.00002;

    /// Throws InvalidConfig unless b is in [0, 1] and k >= 0.
    void validate() const;
    double probability(std::size_t step) const;
    /// One Bernoulli(p(step)) draw.
    bool replace(Rng& rng, std::size_t step) const;
    /// First step with p = 1 (0 when b = 1; SIZE_MAX when k = 0 and b < 1).
    std::size_t saturation_step() const;
};

struct TheseusOptions {
    ReplacementSchedule schedule;
    /// Seed of the replacement draws, kept apart from the shuffling stream.
    std::uint64_t seed = 0;
    /// Replacing phase: predecessor layers frozen, successors trained.
    TrainOptions replacing;
    /// Post-training phase on the successor-only model; epochs 0 skips it.
    TrainOptions post;
};

struct TheseusStats {
    TrainResult replacing;
    TrainResult post;
    /// Replacement draws that chose the successor, and all draws.
    std::size_t replaced = 0;
    std::size_t draws = 0;
};

/// Compresses an even-depth teacher into half as many layers. Successor i
/// starts as a copy of teacher layer 2i and, at every step, independently
/// stands in for teacher block (2i, 2i+1) with probability p(step). The
/// result keeps the teacher's embeddings, final norm and classifier. Throws
/// InvalidConfig for an odd layer count.
model::ClassifierModel theseus_train(const model::ClassifierModel& teacher,
                                     std::span<const data::EncodedExample> train_set,
                                     const TeacherSignals* signals, const TheseusOptions& options,
                                     Rng& rng, TheseusStats* stats = nullptr);

}  // namespace loyalty::compress
