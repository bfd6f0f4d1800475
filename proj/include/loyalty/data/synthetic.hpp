#pragma once

#include <cstddef>
#include <cstdint>

#include "loyalty/data/dataset.hpp"

namespace loyalty::data {

/// Knobs of the templated premise/hypothesis generator.
///
/// Each example draws a label uniformly. Its hypothesis carries `cues_per_example`
/// cue words; each cue comes from the label's cue set with probability
/// `cue_fidelity`, otherwise from another class. Every cue and some content
/// words have a planted synonym that replaces them with probability
/// `synonym_rate`. Finally the label is resampled among the other classes with
/// probability `label_noise`. A planted pair's companion word precedes either
/// member with probability `companion_rate`. Premise words are class-independent distractors.
struct SyntheticOptions {
    std::uint64_t seed = 0;
    std::size_t n_examples = 12000;
    std::size_t n_classes = 3;
    std::size_t dev_examples = 1000;
    std::size_t test_examples = 1000;
    std::size_t cues_per_class = 8;
    std::size_t cues_per_example = 3;
    double cue_fidelity = 0.7;
    double synonym_rate = 0.3;
    double companion_rate = 0.5;
    double label_noise = 0.05;
};

/// Throws InvalidInput for n_examples < 100 or splits that leave fewer than
/// 50 training examples.
TextDataset generate_synthetic(const SyntheticOptions& options);

/// Exact accuracy of the Bayes-optimal classifier on the generator, from
/// enumerating every combination of cue classes.
double bayes_optimal_accuracy(const SyntheticOptions& options);

}  // namespace loyalty::data
