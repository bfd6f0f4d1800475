#include "loyalty/compress/trainer.hpp"

#include <cmath>

#include "loyalty/errors.hpp"
#include "loyalty/nn/ops.hpp"
#include "loyalty/nn/optim.hpp"

namespace loyalty::compress {

std::string to_string(LossChoice c) {
    switch (c) {
        case LossChoice::cross_entropy: return "ce";
        case LossChoice::kd: return "kd";
        case LossChoice::kd_ce: return "kd+ce";
    }
    return "ce";
}

LossChoice parse_loss_choice(const std::string& s) {
    if (s == "ce" || s == "cross-entropy") return LossChoice::cross_entropy;
    if (s == "kd") return LossChoice::kd;
    if (s == "kd+ce") return LossChoice::kd_ce;
    throw InvalidConfig("unknown loss '" + s + "' (expected ce, kd or kd+ce)");
}

TeacherSignals teacher_signals(const model::ClassifierModel& teacher,
                               std::span<const data::EncodedExample> examples, bool with_hidden) {
    TeacherSignals out;
    out.logits.reserve(examples.size());
    if (with_hidden) out.cls_hidden.reserve(examples.size());
    for (const auto& ex : examples) {
        nn::Tape tape(nn::Tape::Mode::inference);
        const auto r = model::forward(teacher, tape, ex.ids);
        const auto v = r.logits.value().values();
        out.logits.emplace_back(v.begin(), v.end());
        if (!with_hidden) continue;
        std::vector<std::vector<double>> layers;
        for (const auto& h : r.hidden) {
            const auto cls = h.value().row_span(0);
            double norm = 0.0;
            for (double x : cls) norm += x * x;
            norm = std::sqrt(norm);
            std::vector<double> unit(cls.begin(), cls.end());
            for (double& x : unit) x = norm > 0.0 ? x / norm : 0.0;
            layers.push_back(std::move(unit));
        }
        out.cls_hidden.push_back(std::move(layers));
    }
    return out;
}

void TrainOptions::validate() const {
    if (batch_size == 0) throw InvalidConfig("batch_size must be positive");
    if (!(learning_rate > 0.0)) throw InvalidConfig("learning_rate must be positive");
    if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) {
        throw InvalidConfig("warmup_fraction must lie in [0, 1]");
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidConfig("alpha must lie in [0, 1]");
    if (!(beta >= 0.0)) throw InvalidConfig("beta must be non-negative");
    if (!(temperature > 0.0)) throw InvalidConfig("temperature must be positive");
    if (weight_decay < 0.0) throw InvalidConfig("weight_decay must be non-negative");
}

namespace {

bool needs_teacher(const TrainOptions& o) { return o.loss != LossChoice::cross_entropy || o.beta > 0.0; }

void check_teacher(const TeacherSignals* teacher, std::size_t n, const TrainOptions& o) {
    if (!needs_teacher(o)) return;
    if (!teacher) throw InvalidConfig("loss '" + to_string(o.loss) + "' needs a teacher");
    if (teacher->logits.size() != n) {
        throw InvalidInput("teacher signals do not cover the training examples");
    }
    if (o.beta > 0.0 && !teacher->has_hidden()) {
        throw InvalidConfig("hidden-state loss needs teacher hidden states");
    }
}

nn::Var example_loss(const model::ForwardResult& r, std::size_t index,
                     const data::EncodedExample& ex, const TeacherSignals* teacher,
                     const TrainOptions& o) {
    nn::Var loss;
    switch (o.loss) {
        case LossChoice::cross_entropy:
            loss = nn::cross_entropy(r.logits, ex.label);
            break;
        case LossChoice::kd:
            loss = nn::kd_loss(r.logits, teacher->logits[index], o.temperature);
            break;
        case LossChoice::kd_ce:
            loss = nn::add(nn::scale(nn::kd_loss(r.logits, teacher->logits[index], o.temperature),
                                     o.alpha),
                           nn::scale(nn::cross_entropy(r.logits, ex.label), 1.0 - o.alpha));
            break;
    }
    if (o.beta > 0.0) {
        if (o.layer_map.size() != r.hidden.size()) {
            throw InvalidConfig("layer map has " + std::to_string(o.layer_map.size()) +
                                " entries for a " + std::to_string(r.hidden.size()) +
                                "-layer student");
        }
        const auto& targets = teacher->cls_hidden[index];
        nn::Var hidden;
        for (std::size_t s = 0; s < r.hidden.size(); ++s) {
            if (o.layer_map[s] >= targets.size()) {
                throw InvalidConfig("layer map points past the teacher's last layer");
            }
            nn::Var term = nn::normalized_mse(nn::row(r.hidden[s], 0), targets[o.layer_map[s]]);
            hidden = hidden.valid() ? nn::add(hidden, term) : term;
        }
        const double weight = o.beta / static_cast<double>(r.hidden.size());
        loss = nn::add(loss, nn::scale(hidden, weight));
    }
    return loss;
}

}  // namespace

TrainResult train_loop(std::vector<nn::Parameter*> params, const ForwardFn& forward_fn,
                       const StepHook& on_step, std::span<const data::EncodedExample> examples,
                       const TeacherSignals* teacher, const TrainOptions& options, Rng& rng) {
    options.validate();
    check_teacher(teacher, examples.size(), options);
    TrainResult result;
    if (options.epochs == 0 || examples.empty()) return result;

    const std::size_t n = examples.size();
    const std::size_t steps_per_epoch = (n + options.batch_size - 1) / options.batch_size;
    const std::size_t total = steps_per_epoch * options.epochs;
    const auto warmup = static_cast<std::size_t>(options.warmup_fraction * static_cast<double>(total));

    nn::AdamOptions adam_opts;
    adam_opts.weight_decay = options.weight_decay;
    adam_opts.clip_norm = options.clip_norm;
    nn::Adam adam(params, adam_opts);

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    nn::Gradients grads;
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += options.batch_size) {
            const std::size_t stop = std::min(n, start + options.batch_size);
            if (on_step) on_step(step);
            grads.clear();
            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t i = order[b];
                nn::Tape tape;
                const auto r = forward_fn(tape, examples[i].ids);
                const nn::Var loss = example_loss(r, i, examples[i], teacher, options);
                epoch_loss += loss.value().item();
                tape.backward(loss, grads);
            }
            grads.scale(1.0 / static_cast<double>(stop - start));
            adam.step(grads, nn::warmup_linear_lr(options.learning_rate, step, warmup, total));
            ++step;
        }
        result.epochs.push_back(EpochStats{epoch, epoch_loss / static_cast<double>(n)});
    }
    result.steps = step;
    return result;
}

TrainResult train(model::ClassifierModel& model, std::span<const data::EncodedExample> examples,
                  const TeacherSignals* teacher, const TrainOptions& options, Rng& rng) {
    if (model.int8_final()) {
        throw InvalidConfig("model '" + model.provenance() +
                            "' has final int8 weights and cannot be trained further");
    }
    model::ForwardOptions fwd;
    fwd.fake_quant = options.fake_quant;
    auto forward_fn = [&model, &fwd](nn::Tape& tape, std::span<const model::TokenId> ids) {
        return model::forward(model, tape, ids, fwd);
    };
    return train_loop(model.parameters(), forward_fn, nullptr, examples, teacher, options, rng);
}

double evaluate_loss(const model::ClassifierModel& model,
                     std::span<const data::EncodedExample> examples, const TeacherSignals* teacher,
                     const TrainOptions& options) {
    check_teacher(teacher, examples.size(), options);
    if (examples.empty()) throw InvalidInput("evaluate_loss on no examples");
    model::ForwardOptions fwd;
    fwd.fake_quant = options.fake_quant;
    double total = 0.0;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        nn::Tape tape(nn::Tape::Mode::inference);
        const auto r = model::forward(model, tape, examples[i].ids, fwd);
        total += example_loss(r, i, examples[i], teacher, options).value().item();
    }
    return total / static_cast<double>(examples.size());
}

std::vector<nn::Parameter*> layer_parameters(model::TransformerLayer& layer) {
    std::vector<nn::Parameter*> out;
    for (auto& h : layer.heads) {
        for (model::Linear* lin : {&h.query, &h.key, &h.value, &h.output}) {
            out.push_back(&lin->weight);
            out.push_back(&lin->bias);
        }
    }
    for (model::LayerNormParams* ln : {&layer.attn_norm, &layer.ffn_norm}) {
        out.push_back(&ln->gain);
        out.push_back(&ln->bias);
    }
    for (model::Linear* lin : {&layer.ffn_in, &layer.ffn_out}) {
        out.push_back(&lin->weight);
        out.push_back(&lin->bias);
    }
    return out;
}

}  // namespace loyalty::compress
