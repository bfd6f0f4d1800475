#include "loyalty/model/classifier.hpp"

#include <cmath>

#include "loyalty/errors.hpp"
#include "loyalty/nn/ops.hpp"

namespace loyalty::model {

void ModelConfig::validate() const {
    if (vocab_size < Tokenizer::kNumSpecial + 1) throw InvalidInput("vocab_size too small");
    if (hidden == 0 || heads == 0 || hidden % heads != 0) {
        throw InvalidInput("hidden dim must be a positive multiple of num_heads");
    }
    if (layers == 0) throw InvalidInput("num_layers must be at least 1");
    if (ffn == 0 || max_length < 2 || num_classes < 2) {
        throw InvalidInput("ffn must be positive, max_length >= 2, num_classes >= 2");
    }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = {{"vocab_size", c.vocab_size}, {"hidden", c.hidden}, {"heads", c.heads},
         {"layers", c.layers},         {"ffn", c.ffn},       {"max_length", c.max_length},
         {"num_classes", c.num_classes}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    j.at("vocab_size").get_to(c.vocab_size);
    j.at("hidden").get_to(c.hidden);
    j.at("heads").get_to(c.heads);
    j.at("layers").get_to(c.layers);
    j.at("ffn").get_to(c.ffn);
    j.at("max_length").get_to(c.max_length);
    j.at("num_classes").get_to(c.num_classes);
}

std::size_t TransformerLayer::active_heads() const {
    std::size_t n = 0;
    for (double g : gates) n += g != 0.0;
    return n;
}

namespace {

nn::Parameter normal_param(std::string name, std::size_t rows, std::size_t cols, double stddev,
                           Rng& rng) {
    nn::Tensor t = nn::Tensor::matrix(rows, cols);
    for (double& v : t.values()) v = stddev * standard_normal(rng);
    return {std::move(name), std::move(t)};
}

nn::Parameter const_param(std::string name, std::size_t cols, double value) {
    return {std::move(name), nn::Tensor::matrix(1, cols, value)};
}

Linear make_linear(const std::string& name, std::size_t in, std::size_t out, double stddev,
                   Rng& rng) {
    return Linear{normal_param(name + ".weight", in, out, stddev, rng),
                  const_param(name + ".bias", out, 0.0), std::nullopt};
}

LayerNormParams make_norm(const std::string& name, std::size_t n) {
    return {const_param(name + ".gain", n, 1.0), const_param(name + ".bias", n, 0.0)};
}

std::vector<nn::Parameter*> layer_params(TransformerLayer& layer) {
    std::vector<nn::Parameter*> out;
    for (auto& h : layer.heads) {
        for (Linear* lin : {&h.query, &h.key, &h.value, &h.output}) {
            out.push_back(&lin->weight);
            out.push_back(&lin->bias);
        }
    }
    for (nn::Parameter* p : {&layer.attn_norm.gain, &layer.attn_norm.bias, &layer.ffn_norm.gain,
                             &layer.ffn_norm.bias, &layer.ffn_in.weight, &layer.ffn_in.bias,
                             &layer.ffn_out.weight, &layer.ffn_out.bias}) {
        out.push_back(p);
    }
    return out;
}

}  // namespace

ClassifierModel ClassifierModel::random(const ModelConfig& config, Rng& rng) {
    config.validate();
    ClassifierModel m;
    m.config_ = config;
    const std::size_t d = config.hidden, dh = config.head_dim();
    const double in_std = 1.0 / std::sqrt(static_cast<double>(d));
    const double resid_std = in_std / std::sqrt(2.0 * static_cast<double>(config.layers));
    m.token_embedding_ = normal_param("token_embedding", config.vocab_size, d, 0.5, rng);
    m.position_embedding_ = normal_param("position_embedding", config.max_length, d, 0.1, rng);
    for (std::size_t l = 0; l < config.layers; ++l) {
        const std::string p = "layers." + std::to_string(l);
        TransformerLayer layer;
        for (std::size_t h = 0; h < config.heads; ++h) {
            const std::string hp = p + ".heads." + std::to_string(h);
            layer.heads.push_back(AttentionHead{
                make_linear(hp + ".query", d, dh, in_std, rng),
                make_linear(hp + ".key", d, dh, in_std, rng),
                make_linear(hp + ".value", d, dh, in_std, rng),
                make_linear(hp + ".output", dh, d, resid_std, rng)});
        }
        layer.gates.assign(config.heads, 1.0);
        layer.attn_norm = make_norm(p + ".attn_norm", d);
        layer.ffn_norm = make_norm(p + ".ffn_norm", d);
        layer.ffn_in = make_linear(p + ".ffn_in", d, config.ffn, in_std, rng);
        layer.ffn_out = make_linear(p + ".ffn_out", config.ffn, d,
                                    resid_std * std::sqrt(double(d) / double(config.ffn)), rng);
        m.layers_.push_back(std::move(layer));
    }
    m.final_norm_ = make_norm("final_norm", d);
    m.classifier_ = make_linear("classifier", d, config.num_classes, in_std, rng);
    return m;
}

void ClassifierModel::sync_layer_count() {
    config_.layers = layers_.size();
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const std::string prefix = "layers." + std::to_string(l);
        for (nn::Parameter* param : layer_params(layers_[l])) {
            const auto dot = param->name.find('.', std::string("layers.").size());
            param->name = prefix + param->name.substr(dot);
        }
    }
}

std::size_t ClassifierModel::active_heads() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.active_heads();
    return n;
}

bool ClassifierModel::quantized() const {
    bool any = false;
    for_each_linear([&](const std::string&, const Linear& lin) { any = any || lin.quant.has_value(); });
    return any;
}

void ClassifierModel::set_gate(std::size_t layer, std::size_t head, double value) {
    if (layer >= layers_.size() || head >= config_.heads) {
        throw InvalidInput("set_gate: (" + std::to_string(layer) + ", " + std::to_string(head) +
                           ") out of range");
    }
    if (value != 0.0 && value != 1.0) throw InvalidInput("gates must be exactly 0 or 1");
    layers_[layer].gates[head] = value;
}

void ClassifierModel::for_each_linear(
    const std::function<void(const std::string&, Linear&)>& fn) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const std::string p = "layers." + std::to_string(l);
        auto& layer = layers_[l];
        for (std::size_t h = 0; h < layer.heads.size(); ++h) {
            const std::string hp = p + ".heads." + std::to_string(h);
            fn(hp + ".query", layer.heads[h].query);
            fn(hp + ".key", layer.heads[h].key);
            fn(hp + ".value", layer.heads[h].value);
            fn(hp + ".output", layer.heads[h].output);
        }
        fn(p + ".ffn_in", layer.ffn_in);
        fn(p + ".ffn_out", layer.ffn_out);
    }
    fn("classifier", classifier_);
}

void ClassifierModel::for_each_linear(
    const std::function<void(const std::string&, const Linear&)>& fn) const {
    const_cast<ClassifierModel*>(this)->for_each_linear(
        [&](const std::string& name, Linear& lin) { fn(name, lin); });
}

std::vector<nn::Parameter*> ClassifierModel::parameters() {
    std::vector<nn::Parameter*> out{&token_embedding_, &position_embedding_};
    for (auto& layer : layers_) {
        for (auto& h : layer.heads) {
            for (Linear* lin : {&h.query, &h.key, &h.value, &h.output}) {
                out.push_back(&lin->weight);
                out.push_back(&lin->bias);
            }
        }
        out.push_back(&layer.attn_norm.gain);
        out.push_back(&layer.attn_norm.bias);
        out.push_back(&layer.ffn_norm.gain);
        out.push_back(&layer.ffn_norm.bias);
        out.push_back(&layer.ffn_in.weight);
        out.push_back(&layer.ffn_in.bias);
        out.push_back(&layer.ffn_out.weight);
        out.push_back(&layer.ffn_out.bias);
    }
    out.push_back(&final_norm_.gain);
    out.push_back(&final_norm_.bias);
    out.push_back(&classifier_.weight);
    out.push_back(&classifier_.bias);
    return out;
}

std::vector<const nn::Parameter*> ClassifierModel::parameters() const {
    auto mut = const_cast<ClassifierModel*>(this)->parameters();
    return {mut.begin(), mut.end()};
}

namespace {

class Forwarder {
public:
    Forwarder(nn::Tape& tape, const ForwardOptions& options) : tape_(tape), options_(options) {}

    nn::Var param(const nn::Parameter& p) {
        if (options_.is_frozen && options_.is_frozen(p)) return tape_.constant_ref(p.value);
        return tape_.param(p);
    }

    nn::Var linear(nn::Var x, const Linear& lin) {
        if (options_.observe_linear) options_.observe_linear(lin, x.value());
        if (lin.quant && !tape_.recording()) {
            return tape_.constant(nn::int8_linear(x.value(), *lin.quant, lin.bias.value.values()));
        }
        if (lin.quant || options_.fake_quant) {
            const bool quant_inputs = !lin.quant || lin.quant->quantize_activations;
            nn::Var xin = quant_inputs ? nn::fake_quantize(x) : x;
            return nn::add_row(nn::matmul(xin, nn::fake_quantize(param(lin.weight))),
                               param(lin.bias));
        }
        return nn::add_row(nn::matmul(x, param(lin.weight)), param(lin.bias));
    }

    nn::Var norm(nn::Var x, const LayerNormParams& p) {
        return nn::layer_norm(x, param(p.gain), param(p.bias));
    }

private:
    nn::Tape& tape_;
    const ForwardOptions& options_;
};

}  // namespace

ForwardResult forward(const ClassifierModel& model, nn::Tape& tape, std::span<const TokenId> ids,
                      const ForwardOptions& options) {
    const auto& cfg = model.config();
    if (ids.empty()) throw InvalidInput("forward: empty token sequence");
    if (ids.size() > cfg.max_length) {
        throw InvalidInput("forward: sequence of length " + std::to_string(ids.size()) +
                           " exceeds max_length " + std::to_string(cfg.max_length));
    }
    for (TokenId id : ids) {
        if (id >= cfg.vocab_size) {
            throw InvalidInput("forward: token id " + std::to_string(id) + " >= vocab size " +
                               std::to_string(cfg.vocab_size));
        }
    }

    std::vector<const TransformerLayer*> own;
    const std::vector<const TransformerLayer*>* stack = options.layer_override;
    if (!stack) {
        for (const auto& l : model.layers()) own.push_back(&l);
        stack = &own;
    }
    if (options.gate_params && options.gate_params->size() != stack->size()) {
        throw InvalidInput("forward: gate parameters do not match the layer count");
    }

    Forwarder f(tape, options);
    std::vector<std::size_t> positions(ids.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
    nn::Var x = nn::add(nn::embedding(f.param(model.token_embedding()), ids),
                        nn::embedding(f.param(model.position_embedding()), positions));

    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim()));
    ForwardResult out;
    for (std::size_t l = 0; l < stack->size(); ++l) {
        const TransformerLayer& layer = *(*stack)[l];
        nn::Var h = f.norm(x, layer.attn_norm);
        nn::Var attn;
        for (std::size_t k = 0; k < layer.heads.size(); ++k) {
            if (layer.gates[k] == 0.0) continue;
            const AttentionHead& head = layer.heads[k];
            nn::Var q = f.linear(h, head.query);
            nn::Var key = f.linear(h, head.key);
            nn::Var v = f.linear(h, head.value);
            nn::Var weights = nn::softmax_rows(nn::scale(nn::matmul_nt(q, key), inv_sqrt_dh));
            nn::Var o = f.linear(nn::matmul(weights, v), head.output);
            if (options.gate_params) {
                o = nn::scale_by(o, tape.param((*options.gate_params)[l].at(k)));
            }
            attn = attn.valid() ? nn::add(attn, o) : o;
        }
        if (attn.valid()) x = nn::add(x, attn);
        nn::Var ff = f.linear(nn::gelu(f.linear(f.norm(x, layer.ffn_norm), layer.ffn_in)),
                              layer.ffn_out);
        x = nn::add(x, ff);
        out.hidden.push_back(x);
    }
    nn::Var cls = nn::row(f.norm(x, model.final_norm()), 0);
    out.logits = f.linear(cls, model.classifier());
    return out;
}

std::vector<double> logits(const ClassifierModel& model, std::span<const TokenId> ids) {
    nn::Tape tape(nn::Tape::Mode::inference);
    const auto r = forward(model, tape, ids);
    const auto v = r.logits.value().values();
    return {v.begin(), v.end()};
}

nn::ProbVector predict_proba(const ClassifierModel& model, std::span<const TokenId> ids) {
    return nn::softmax(logits(model, ids), 1.0);
}

ClassifierModel truncate(const ClassifierModel& model, std::size_t keep_layers) {
    if (keep_layers == 0 || keep_layers > model.num_layers()) {
        throw InvalidInput("truncate: keep_layers must be in [1, " +
                           std::to_string(model.num_layers()) + "], got " +
                           std::to_string(keep_layers));
    }
    ClassifierModel out = model;
    out.layers().resize(keep_layers);
    out.sync_layer_count();
    out.set_provenance("truncate(" + model.provenance() + ", " + std::to_string(keep_layers) + ")");
    return out;
}

}  // namespace loyalty::model
