#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "loyalty/model/tokenizer.hpp"
#include "loyalty/nn/int8.hpp"
#include "loyalty/nn/losses.hpp"
#include "loyalty/nn/tape.hpp"
#include "loyalty/rng.hpp"

namespace loyalty::model {

struct ModelConfig {
    std::size_t vocab_size = 1000;
    std::size_t hidden = 64;
    std::size_t heads = 4;
    std::size_t layers = 4;
    std::size_t ffn = 256;
    std::size_t max_length = 64;
    std::size_t num_classes = 3;

    std::size_t head_dim() const { return hidden / heads; }
    /// Throws InvalidInput when dimensions are inconsistent.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Affine map y = x W + b with W stored [in x out]. When `quant` is set the
/// layer runs int8 at inference and fake-quantized during training; `weight`
/// then holds the float master copy.
struct Linear {
    nn::Parameter weight;
    nn::Parameter bias;
    std::optional<nn::QuantizedLinear> quant;
};

struct LayerNormParams {
    nn::Parameter gain;
    nn::Parameter bias;
};

struct AttentionHead {
    Linear query;
    Linear key;
    Linear value;
    Linear output;  // [head_dim x hidden]
};

/// Pre-norm transformer block. A head whose gate is 0 is skipped entirely.
struct TransformerLayer {
    std::vector<AttentionHead> heads;
    std::vector<double> gates;
    LayerNormParams attn_norm;
    LayerNormParams ffn_norm;
    Linear ffn_in;
    Linear ffn_out;

    std::size_t active_heads() const;
};

class ClassifierModel {
public:
    ClassifierModel() = default;

    static ClassifierModel random(const ModelConfig& config, Rng& rng);

    const ModelConfig& config() const { return config_; }
    std::size_t num_layers() const { return layers_.size(); }
    std::size_t total_heads() const { return layers_.size() * config_.heads; }
    std::size_t active_heads() const;

    std::vector<TransformerLayer>& layers() { return layers_; }
    const std::vector<TransformerLayer>& layers() const { return layers_; }
    nn::Parameter& token_embedding() { return token_embedding_; }
    const nn::Parameter& token_embedding() const { return token_embedding_; }
    nn::Parameter& position_embedding() { return position_embedding_; }
    const nn::Parameter& position_embedding() const { return position_embedding_; }
    LayerNormParams& final_norm() { return final_norm_; }
    const LayerNormParams& final_norm() const { return final_norm_; }
    Linear& classifier() { return classifier_; }
    const Linear& classifier() const { return classifier_; }

    const std::string& provenance() const { return provenance_; }
    void set_provenance(std::string p) { provenance_ = std::move(p); }

    /// True once any linear layer carries int8 weights.
    bool quantized() const;
    /// Int8 weights are the deployment precision; no further training allowed.
    bool int8_final() const { return int8_final_; }
    void set_int8_final(bool v) { int8_final_ = v; }

    /// Sets gate (layer, head) to 0 or 1.
    void set_gate(std::size_t layer, std::size_t head, double value);

    /// All float parameters in a fixed order.
    std::vector<nn::Parameter*> parameters();
    std::vector<const nn::Parameter*> parameters() const;
    /// Every linear layer with its dotted name, in the same fixed order.
    void for_each_linear(const std::function<void(const std::string&, Linear&)>& fn);
    void for_each_linear(const std::function<void(const std::string&, const Linear&)>& fn) const;

    /// Rebuilds dimensions and layer parameter names after layers were added,
    /// removed or reordered.
    void sync_layer_count();

private:
    ModelConfig config_;
    nn::Parameter token_embedding_;
    nn::Parameter position_embedding_;
    std::vector<TransformerLayer> layers_;
    LayerNormParams final_norm_;
    Linear classifier_;
    std::string provenance_ = "random";
    bool int8_final_ = false;
};

struct ForwardOptions {
    /// Quantize-dequantize every linear (weights and inputs) with a
    /// straight-through gradient, as in quantization-aware training.
    bool fake_quant = false;
    /// When set, parameters for which this returns true enter the tape as constants.
    std::function<bool(const nn::Parameter&)> is_frozen;
    /// Optional per-(layer, head) 1x1 parameters used as the gate values of
    /// active heads so that d loss / d gate can be read from the tape.
    const std::vector<std::vector<nn::Parameter>>* gate_params = nullptr;
    /// Replaces the model's own layer stack (used for module replacing).
    const std::vector<const TransformerLayer*>* layer_override = nullptr;
    /// Called with every linear layer and its input, before the layer runs.
    std::function<void(const Linear&, const nn::Tensor&)> observe_linear;
};

struct ForwardResult {
    nn::Var logits;               // [1 x num_classes]
    std::vector<nn::Var> hidden;  // per layer, [seq x hidden]
};

/// Runs the classifier on one token sequence. Throws InvalidInput on empty
/// input, out-of-range ids or sequences longer than max_length.
ForwardResult forward(const ClassifierModel& model, nn::Tape& tape, std::span<const TokenId> ids,
                      const ForwardOptions& options = {});

/// Inference-only logits.
std::vector<double> logits(const ClassifierModel& model, std::span<const TokenId> ids);
nn::ProbVector predict_proba(const ClassifierModel& model, std::span<const TokenId> ids);

/// Copy keeping the embeddings, the first `keep_layers` layers and the head.
ClassifierModel truncate(const ClassifierModel& model, std::size_t keep_layers);

}  // namespace loyalty::model
