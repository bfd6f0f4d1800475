#pragma once

#include <span>
#include <string>

#include "loyalty/data/encoded.hpp"
#include "loyalty/metrics/loyalty.hpp"
#include "loyalty/model/classifier.hpp"

namespace loyalty::metrics {

/// Runs `model` over `examples` and collects its distributions.
PredictionSet predict(const model::ClassifierModel& model,
                      std::span<const data::EncodedExample> examples, const std::string& split);

std::vector<std::size_t> gold_labels(std::span<const data::EncodedExample> examples);

}  // namespace loyalty::metrics
