#include "loyalty/compress/theseus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "loyalty/errors.hpp"

namespace loyalty::compress {

void ReplacementSchedule::validate() const {
    if (!(b >= 0.0 && b <= 1.0)) throw InvalidConfig("replacement base b must lie in [0, 1]");
    if (!(k >= 0.0) || !std::isfinite(k)) throw InvalidConfig("replacement rate k must be >= 0");
}

double ReplacementSchedule::probability(std::size_t step) const {
    return std::min(1.0, b + k * static_cast<double>(step));
}

bool ReplacementSchedule::replace(Rng& rng, std::size_t step) const {
    return uniform01(rng) < probability(step);
}

std::size_t ReplacementSchedule::saturation_step() const {
    if (b >= 1.0) return 0;
    if (k <= 0.0) return std::numeric_limits<std::size_t>::max();
    auto t = static_cast<std::size_t>(std::ceil((1.0 - b) / k));
    while (t > 0 && probability(t - 1) >= 1.0) --t;
    while (probability(t) < 1.0) ++t;
    return t;
}

model::ClassifierModel theseus_train(const model::ClassifierModel& teacher,
                                     std::span<const data::EncodedExample> train_set,
                                     const TeacherSignals* signals, const TheseusOptions& options,
                                     Rng& rng, TheseusStats* stats) {
    options.schedule.validate();
    const std::size_t lt = teacher.num_layers();
    if (lt == 0 || lt % 2 != 0) {
        throw InvalidConfig("theseus_train needs an even teacher layer count, got " +
                            std::to_string(lt));
    }
    if (teacher.int8_final()) throw InvalidConfig("theseus_train: teacher has final int8 weights");
    const std::size_t ls = lt / 2;

    std::vector<model::TransformerLayer> successors;
    for (std::size_t i = 0; i < ls; ++i) successors.push_back(teacher.layers()[2 * i]);

    std::vector<nn::Parameter*> trainable;
    for (auto& layer : successors) {
        for (nn::Parameter* p : layer_parameters(layer)) trainable.push_back(p);
    }
    const std::unordered_set<const nn::Parameter*> trainable_set(trainable.begin(), trainable.end());

    std::vector<const model::TransformerLayer*> stack;
    model::ForwardOptions fwd;
    fwd.layer_override = &stack;
    fwd.is_frozen = [&trainable_set](const nn::Parameter& p) { return !trainable_set.contains(&p); };

    TheseusStats local;
    Rng draws = make_rng(options.seed, "theseus");
    auto on_step = [&](std::size_t step) {
        stack.clear();
        for (std::size_t i = 0; i < ls; ++i) {
            ++local.draws;
            if (options.schedule.replace(draws, step)) {
                ++local.replaced;
                stack.push_back(&successors[i]);
            } else {
                stack.push_back(&teacher.layers()[2 * i]);
                stack.push_back(&teacher.layers()[2 * i + 1]);
            }
        }
    };
    auto forward_fn = [&](nn::Tape& tape, std::span<const model::TokenId> ids) {
        return model::forward(teacher, tape, ids, fwd);
    };
    TrainOptions replacing = options.replacing;
    replacing.beta = 0.0;
    local.replacing = train_loop(trainable, forward_fn, on_step, train_set, signals, replacing, rng);

    model::ClassifierModel compact = teacher;
    compact.layers() = std::move(successors);
    compact.sync_layer_count();
    compact.set_provenance("theseus(" + teacher.provenance() + ")");

    TrainOptions post = options.post;
    post.beta = 0.0;
    if (post.epochs > 0) local.post = train(compact, train_set, signals, post, rng);
    if (stats) *stats = local;
    return compact;
}

}  // namespace loyalty::compress
