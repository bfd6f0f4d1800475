#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "loyalty/data/encoded.hpp"
#include "loyalty/model/classifier.hpp"

namespace loyalty::compress {

/// Accumulated |d loss / d gate| per (layer, head). Pruned heads score 0.
struct HeadImportance {
    std::vector<std::vector<double>> scores;

    double at(std::size_t layer, std::size_t head) const { return scores.at(layer).at(head); }
};

/// Sums, over batches of `batch_size` examples, the absolute gradient of the
/// batch's mean cross-entropy with respect to each head gate held at its
/// current value. Throws InvalidInput for an empty example list.
HeadImportance head_importance(const model::ClassifierModel& model,
                               std::span<const data::EncodedExample> examples,
                               std::size_t batch_size = 32);

struct HeadPruneResult {
    model::ClassifierModel model;
    HeadImportance importance;
    /// (layer, head) pairs closed by this call, in selection order.
    std::vector<std::pair<std::size_t, std::size_t>> pruned;
};

/// Closes the floor(fraction * total_heads) active heads of lowest importance,
/// ties broken by (layer, head) ascending. Throws InvalidConfig when fraction
/// is outside [0, 1) or the selection would close every remaining head.
HeadPruneResult head_prune(const model::ClassifierModel& model,
                           std::span<const data::EncodedExample> examples, double fraction,
                           std::size_t batch_size = 32);

}  // namespace loyalty::compress
