#include "loyalty/metrics/predict.hpp"

namespace loyalty::metrics {

PredictionSet predict(const model::ClassifierModel& model,
                      std::span<const data::EncodedExample> examples, const std::string& split) {
    std::vector<std::string> ids;
    std::vector<nn::ProbVector> probs;
    ids.reserve(examples.size());
    probs.reserve(examples.size());
    for (const auto& ex : examples) {
        ids.push_back(ex.id);
        probs.push_back(model::predict_proba(model, ex.ids));
    }
    return PredictionSet::from_probs(std::move(ids), std::move(probs), model.provenance(), split);
}

std::vector<std::size_t> gold_labels(std::span<const data::EncodedExample> examples) {
    std::vector<std::size_t> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) out.push_back(ex.label);
    return out;
}

}  // namespace loyalty::metrics
