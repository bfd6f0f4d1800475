#include "loyalty/compress/prune.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "loyalty/errors.hpp"
#include "loyalty/nn/ops.hpp"

namespace loyalty::compress {

HeadImportance head_importance(const model::ClassifierModel& model,
                               std::span<const data::EncodedExample> examples,
                               std::size_t batch_size) {
    if (examples.empty()) throw InvalidInput("head_importance needs examples");
    if (batch_size == 0) throw InvalidInput("head_importance batch_size must be positive");

    std::vector<std::vector<nn::Parameter>> gates;
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        std::vector<nn::Parameter> row;
        for (std::size_t h = 0; h < model.layers()[l].heads.size(); ++h) {
            row.push_back(nn::Parameter{"gate", nn::Tensor::scalar(model.layers()[l].gates[h])});
        }
        gates.push_back(std::move(row));
    }
    model::ForwardOptions opts;
    opts.gate_params = &gates;
    opts.is_frozen = [](const nn::Parameter&) { return true; };

    HeadImportance imp;
    for (const auto& row : gates) imp.scores.emplace_back(row.size(), 0.0);

    nn::Gradients grads;
    for (std::size_t start = 0; start < examples.size(); start += batch_size) {
        const std::size_t stop = std::min(examples.size(), start + batch_size);
        grads.clear();
        for (std::size_t i = start; i < stop; ++i) {
            nn::Tape tape;
            const auto r = model::forward(model, tape, examples[i].ids, opts);
            tape.backward(nn::cross_entropy(r.logits, examples[i].label), grads);
        }
        const double inv = 1.0 / static_cast<double>(stop - start);
        for (std::size_t l = 0; l < gates.size(); ++l) {
            for (std::size_t h = 0; h < gates[l].size(); ++h) {
                if (const nn::Tensor* g = grads.find(gates[l][h])) {
                    imp.scores[l][h] += std::abs(g->item() * inv);
                }
            }
        }
    }
    return imp;
}

HeadPruneResult head_prune(const model::ClassifierModel& model,
                           std::span<const data::EncodedExample> examples, double fraction,
                           std::size_t batch_size) {
    if (!(fraction >= 0.0 && fraction < 1.0)) {
        throw InvalidConfig("head_prune fraction must lie in [0, 1)");
    }
    HeadPruneResult result{model, {}, {}};
    const auto count = static_cast<std::size_t>(
        std::floor(fraction * static_cast<double>(model.total_heads())));
    if (count == 0) return result;
    if (count >= model.active_heads()) {
        throw InvalidConfig("head_prune would close all " + std::to_string(model.active_heads()) +
                            " remaining heads");
    }
    result.importance = head_importance(model, examples, batch_size);

    std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        for (std::size_t h = 0; h < model.layers()[l].heads.size(); ++h) {
            if (model.layers()[l].gates[h] != 0.0) {
                candidates.emplace_back(result.importance.scores[l][h], l, h);
            }
        }
    }
    std::sort(candidates.begin(), candidates.end());
    for (std::size_t i = 0; i < count; ++i) {
        const auto [score, l, h] = candidates[i];
        result.model.set_gate(l, h, 0.0);
        result.pruned.emplace_back(l, h);
    }
    result.model.set_provenance("head-prune(" + model.provenance() + ", " +
                                std::to_string(count) + ")");
    return result;
}

}  // namespace loyalty::compress
